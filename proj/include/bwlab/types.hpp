#ifndef BWLAB_TYPES_HPP
#define BWLAB_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>

namespace bwlab {

using cplx = std::complex<double>;

constexpr double kPi = 3.141592653589793238462643383279502884;

enum class ErrorCode {
    Config = 1,      // invalid family/parameter combination
    Domain,          // inputs outside an operation's validity region
    Convergence,     // iteration failed to converge
    Accuracy,        // result did not meet its accuracy contract
    Geometry,        // contour/diagram construction failed
    Stiffness,       // integrator step-size underflow
    NotFound,        // bracketing / search found nothing
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline double sq(double x) { return x * x; }

} // namespace bwlab

#endif
