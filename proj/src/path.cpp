#include "bwlab/path.hpp"

#include <cmath>

namespace bwlab {

ComplexPath ComplexPath::segments(std::vector<cplx> pts) {
    ComplexPath p;
    p.kind = Kind::SegmentChain;
    p.vertices = std::move(pts);
    p.validate();
    return p;
}

ComplexPath ComplexPath::ray(cplx anchor, cplx dir, double length) {
    double m = std::abs(dir);
    if (m == 0.0) throw Error(ErrorCode::Config, "ray direction must be nonzero");
    ComplexPath p;
    p.kind = Kind::Ray;
    p.ray_dir = dir / m;
    p.ray_length = length;
    p.vertices = {anchor, anchor + p.ray_dir * length};
    p.validate();
    return p;
}

ComplexPath ComplexPath::rectangle(cplx lo, cplx hi, int start_corner) {
    ComplexPath p;
    p.kind = Kind::RectangleBoundary;
    std::vector<cplx> c = {lo, cplx(hi.real(), lo.imag()), hi, cplx(lo.real(), hi.imag())};
    start_corner = ((start_corner % 4) + 4) % 4;
    for (int i = 0; i <= 4; ++i) p.vertices.push_back(c[(start_corner + i) % 4]);
    p.validate();
    return p;
}

ComplexPath ComplexPath::contour(std::vector<cplx> loop) {
    ComplexPath p;
    p.kind = Kind::ContourAroundCut;
    p.vertices = std::move(loop);
    if (p.vertices.size() < 3 || std::abs(p.vertices.front() - p.vertices.back()) > 0)
        throw Error(ErrorCode::Config, "contour must be closed (first == last vertex)");
    p.validate();
    return p;
}

void ComplexPath::validate() const {
    if (vertices.size() < 2) throw Error(ErrorCode::Config, "path needs at least two vertices");
    for (size_t i = 1; i < vertices.size(); ++i)
        if (vertices[i] == vertices[i - 1])
            throw Error(ErrorCode::Config, "consecutive path vertices must be distinct");
}

double ComplexPath::length() const {
    double s = 0;
    for (size_t i = 1; i < vertices.size(); ++i) s += std::abs(vertices[i] - vertices[i - 1]);
    return s;
}

bool ComplexPath::closed() const {
    return vertices.size() > 2 && vertices.front() == vertices.back();
}

cplx ComplexPath::point_at(double f) const {
    double target = f * length();
    double s = 0;
    for (size_t i = 1; i < vertices.size(); ++i) {
        double seg = std::abs(vertices[i] - vertices[i - 1]);
        if (s + seg >= target || i + 1 == vertices.size()) {
            double t = seg > 0 ? (target - s) / seg : 0.0;
            t = std::min(1.0, std::max(0.0, t));
            return vertices[i - 1] + t * (vertices[i] - vertices[i - 1]);
        }
        s += seg;
    }
    return vertices.back();
}

double Rect::diameter() const {
    return std::abs(hi - lo);
}

bool Rect::contains(cplx z) const {
    return z.real() >= lo.real() && z.real() <= hi.real() && z.imag() >= lo.imag() && z.imag() <= hi.imag();
}

double Rect::boundary_distance(cplx z) const {
    double dx = std::min(std::abs(z.real() - lo.real()), std::abs(z.real() - hi.real()));
    double dy = std::min(std::abs(z.imag() - lo.imag()), std::abs(z.imag() - hi.imag()));
    if (contains(z)) return std::min(dx, dy);
    double ox = std::max({lo.real() - z.real(), 0.0, z.real() - hi.real()});
    double oy = std::max({lo.imag() - z.imag(), 0.0, z.imag() - hi.imag()});
    return std::hypot(ox, oy);
}

} // namespace bwlab
