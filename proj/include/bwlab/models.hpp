#ifndef BWLAB_MODELS_HPP
#define BWLAB_MODELS_HPP

#include <optional>
#include <string>
#include <vector>

#include "bwlab/types.hpp"

namespace bwlab {

// The oscillator family and its parametrizations:
//   Hbar       -hb^2 d2/dx2 + i(x^3 - x)
//   BetaTilde  -d2/dx2 + x^2 + i sqrt(beta) x^3         (harmonic at beta = 0)
//   AlphaHat   -d2/dx2 + i(x^3 + alpha x)
//   KDelta     -k^2 d2/dx2 + i(x^3 - delta x)
//   RealCubic  -hb^2 d2/dx2 + x^3 - x                   (geometry only)
enum class Family { Hbar, BetaTilde, AlphaHat, KDelta, RealCubic };

const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& s);

namespace consts {
// c = 2/(3 sqrt 3), E0 = -ic: value of V at the stationary point x_+.
inline const double c = 2.0 / (3.0 * std::sqrt(3.0));
inline const cplx E0 = cplx(0.0, -c);
inline const double x_plus = 1.0 / std::sqrt(3.0);
// c_pm = 3^{1/4} exp(+-i pi/4)
cplx c_pm(int sign);
// beta_pm(hb) = 3^{-5/4} exp(-+ i 5 pi/4) hb; the continued argument -+5pi/4
// lies outside the principal cut and is tracked separately (winding -+1).
cplx beta_pm(double hbar, int sign);
double beta_pm_arg(double hbar, int sign);
} // namespace consts

struct ModelSpec {
    Family family = Family::Hbar;
    cplx hbar{1.0, 0.0};   // Hbar, RealCubic
    cplx beta{0.0, 0.0};   // BetaTilde
    cplx alpha{0.0, 0.0};  // AlphaHat
    double k = 1.0;        // KDelta
    double delta = 1.0;    // KDelta
    // Continued argument of beta for fractional powers; defaults to the
    // principal argument. Carries the winding when a scale map leaves the cut
    // plane (e.g. beta_pm with arg = -+5pi/4).
    std::optional<double> beta_arg;
    // Optional translation: potential evaluated as V(z + translation).
    cplx translation{0.0, 0.0};

    static ModelSpec hbar_family(cplx hb);
    static ModelSpec beta_family(cplx beta, std::optional<double> arg = std::nullopt);
    static ModelSpec alpha_family(cplx alpha);
    static ModelSpec kdelta_family(double k, double delta);
    static ModelSpec real_cubic(double hb = 1.0);

    // Throws Error(Config) on an invalid family/parameter combination.
    // Hbar accepts hb in the sector C0 = { |arg hb| < pi/4 } (analytic
    // continuation domain); the JSON interface restricts to real hb > 0.
    void validate() const;

    cplx potential(cplx z) const;
    cplx dpotential(cplx z) const;
    // Coefficient and degree of the leading term of V.
    cplx lead_coeff() const;
    int degree() const;
    // Effective semiclassical parameter multiplying -d2/dz2 as hb_eff^2.
    cplx hbar_eff() const;
    // Continued argument of beta (principal unless set explicitly).
    double beta_argument() const;

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);

    bool operator==(const ModelSpec&) const = default;
};

enum class TpLabel { I0, Iminus, Iplus };

struct TurningPoint {
    cplx z;
    int multiplicity = 1;
    std::vector<TpLabel> labels; // merged roots carry both labels
};

struct TurningPointSet {
    cplx energy;
    std::vector<TurningPoint> roots;
    double vieta_residual = 0.0;
    bool degenerate = false;

    const TurningPoint& get(TpLabel l) const;
    bool has(TpLabel l) const;
};

struct StationaryPoint {
    cplx z;
    cplx value; // V at the point
    int multiplicity = 1;
};

cplx potential(const ModelSpec& spec, cplx z);
std::vector<StationaryPoint> stationary_points(const ModelSpec& spec);

// The roots of V(z) = E via the closed-form cubic (quadratic for beta = 0),
// Newton-polished, multiplicity-tagged with tolerance 1e-8 on separation.
// Labels: for P_x-symmetric configurations (real E in Hbar/AlphaHat/KDelta,
// real E in RealCubic) the near-imaginary root is I0 and the others I-+ by
// real part (RealCubic: leftmost is I0); otherwise labels follow the roots by
// continuity along a straight segment from a real reference energy.
TurningPointSet turning_points(const ModelSpec& spec, cplx E);

// Affine energy map E_target = scale * E_source + offset between families.
struct ScaleMap {
    Family source = Family::Hbar;
    Family target = Family::AlphaHat;
    ModelSpec source_spec;
    ModelSpec target_spec;
    cplx energy_scale{1.0, 0.0};
    cplx energy_offset{0.0, 0.0};
    // Argument actually used for fractional powers of the base parameter,
    // plus its winding relative to the principal branch.
    double branch_arg = 0.0;
    int winding = 0;

    cplx map_energy(cplx E) const { return energy_scale * E + energy_offset; }
    cplx unmap_energy(cplx Et) const { return (Et - energy_offset) / energy_scale; }
    ScaleMap inverse() const;
};

struct ScaleMapOptions {
    int beta_sign = +1;  // Hbar -> BetaTilde branch (+ or -)
    double delta = 1.0;  // Hbar -> KDelta free parameter
};

// Supported pairs: Hbar<->AlphaHat, BetaTilde<->AlphaHat, Hbar->BetaTilde(+-),
// Hbar->KDelta.  Throws Error(Config) for anything else.
ScaleMap scale_map(const ModelSpec& source, Family target, const ScaleMapOptions& opts = {});

// Principal power with an explicitly continued argument: |b|^p exp(i p arg).
cplx pow_continued(cplx b, double p, std::optional<double> arg = std::nullopt);

} // namespace bwlab

#endif
