#ifndef BWLAB_PATH_HPP
#define BWLAB_PATH_HPP

#include <vector>

#include "bwlab/types.hpp"

namespace bwlab {

// Oriented polyline in the complex plane. Rays are stored as a two-vertex
// chain (anchor, anchor + len*dir); closed contours repeat the first vertex.
struct ComplexPath {
    enum class Kind { SegmentChain, Ray, RectangleBoundary, ContourAroundCut };

    Kind kind = Kind::SegmentChain;
    std::vector<cplx> vertices;
    cplx ray_dir{1.0, 0.0};
    double ray_length = 0.0;

    static ComplexPath segments(std::vector<cplx> pts);
    static ComplexPath ray(cplx anchor, cplx dir, double length);
    // counterclockwise boundary of [re(lo),re(hi)] x [im(lo),im(hi)],
    // starting and ending at the given corner index (0 = lower-left).
    static ComplexPath rectangle(cplx lo, cplx hi, int start_corner = 0);
    static ComplexPath contour(std::vector<cplx> loop); // closed, first == last

    double length() const;
    bool closed() const;
    size_t segment_count() const { return vertices.size() < 2 ? 0 : vertices.size() - 1; }
    cplx point_at(double arc_fraction) const;

    void validate() const;
};

struct Rect {
    cplx lo, hi; // corners, re(lo) <= re(hi), im(lo) <= im(hi)

    double width() const { return hi.real() - lo.real(); }
    double height() const { return hi.imag() - lo.imag(); }
    double diameter() const;
    cplx center() const { return 0.5 * (lo + hi); }
    bool contains(cplx z) const;
    double boundary_distance(cplx z) const;
};

} // namespace bwlab

#endif
