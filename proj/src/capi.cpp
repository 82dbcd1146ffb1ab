#include "bwlab.h"

#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "bwlab/continuation.hpp"
#include "bwlab/semiclassics.hpp"
#include "bwlab/version.hpp"
#include "bwlab/zeros.hpp"

using namespace bwlab;
using nlohmann::json;

struct bwlab_model {
    ModelSpec spec;
};

namespace {

thread_local std::string g_last_error;

bwlab_status set_error(const Error& e) {
    g_last_error = e.what();
    switch (e.code()) {
        case ErrorCode::Config: return BWLAB_ERR_CONFIG;
        case ErrorCode::Domain: return BWLAB_ERR_DOMAIN;
        case ErrorCode::Convergence: return BWLAB_ERR_CONVERGENCE;
        case ErrorCode::Accuracy: return BWLAB_ERR_ACCURACY;
        case ErrorCode::Geometry: return BWLAB_ERR_GEOMETRY;
        case ErrorCode::Stiffness: return BWLAB_ERR_STIFFNESS;
        case ErrorCode::NotFound: return BWLAB_ERR_NOT_FOUND;
    }
    return BWLAB_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <typename F>
bwlab_status guarded(F&& f) {
    try {
        f();
        return BWLAB_OK;
    } catch (const Error& e) {
        return set_error(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BWLAB_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return BWLAB_ERR_INTERNAL;
    }
}

ShootingOptions shooting_of(const bwlab_options* o) {
    ShootingOptions s;
    if (o) {
        if (o->tol > 0) s.rel_tol = o->tol;
        if (o->shoot_L > 0) s.L = o->shoot_L;
    }
    return s;
}

} // namespace

extern "C" {

const char* bwlab_version(void) { return BWLAB_VERSION; }

const char* bwlab_last_error(void) { return g_last_error.c_str(); }

void bwlab_string_free(char* s) { std::free(s); }

void bwlab_options_default(bwlab_options* opts) {
    if (!opts) return;
    opts->tol = 1e-12;
    opts->shoot_L = 0.0;
    opts->seed = 0;
    opts->attach_labels = 1;
}

bwlab_status bwlab_model_create_json(const char* text, bwlab_model** out) {
    return guarded([&] {
        if (!text || !out) throw Error(ErrorCode::Config, "null argument");
        *out = new bwlab_model{ModelSpec::from_json(text)};
    });
}

#define BWLAB_MAKE(fn, expr)                                        \
    bwlab_status fn {                                               \
        return guarded([&] {                                        \
            if (!out) throw Error(ErrorCode::Config, "null output"); \
            ModelSpec s = (expr);                                   \
            s.validate();                                           \
            *out = new bwlab_model{s};                              \
        });                                                         \
    }

BWLAB_MAKE(bwlab_model_create_hbar(double hbar, bwlab_model** out), ModelSpec::hbar_family(hbar))
BWLAB_MAKE(bwlab_model_create_beta(double br, double bi, bwlab_model** out),
           ModelSpec::beta_family(cplx(br, bi)))
BWLAB_MAKE(bwlab_model_create_alpha(double ar, double ai, bwlab_model** out),
           ModelSpec::alpha_family(cplx(ar, ai)))
BWLAB_MAKE(bwlab_model_create_kdelta(double k, double delta, bwlab_model** out),
           ModelSpec::kdelta_family(k, delta))
BWLAB_MAKE(bwlab_model_create_real_cubic(bwlab_model** out), ModelSpec::real_cubic())

#undef BWLAB_MAKE

void bwlab_model_destroy(bwlab_model* m) { delete m; }

bwlab_status bwlab_model_to_json(const bwlab_model* m, char** json_out) {
    return guarded([&] {
        if (!m || !json_out) throw Error(ErrorCode::Config, "null argument");
        *json_out = dup_string(m->spec.to_json());
    });
}

bwlab_status bwlab_potential(const bwlab_model* m, double re_z, double im_z, double* re_out,
                             double* im_out) {
    return guarded([&] {
        if (!m || !re_out || !im_out) throw Error(ErrorCode::Config, "null argument");
        cplx v = potential(m->spec, cplx(re_z, im_z));
        *re_out = v.real();
        *im_out = v.imag();
    });
}

bwlab_status bwlab_stationary_points(const bwlab_model* m, double* zs, int* n_out) {
    return guarded([&] {
        if (!m || !zs || !n_out) throw Error(ErrorCode::Config, "null argument");
        auto sp = stationary_points(m->spec);
        *n_out = static_cast<int>(sp.size());
        for (size_t i = 0; i < sp.size() && i < 3; ++i) {
            zs[2 * i] = sp[i].z.real();
            zs[2 * i + 1] = sp[i].z.imag();
        }
    });
}

bwlab_status bwlab_turning_points_json(const bwlab_model* m, double re_E, double im_E,
                                       char** json_out) {
    return guarded([&] {
        if (!m || !json_out) throw Error(ErrorCode::Config, "null argument");
        auto tps = turning_points(m->spec, cplx(re_E, im_E));
        json j;
        j["energy"] = {re_E, im_E};
        j["vieta_residual"] = tps.vieta_residual;
        j["degenerate"] = tps.degenerate;
        json roots = json::array();
        for (auto& t : tps.roots) {
            std::string lab;
            for (auto l : t.labels) lab += (l == TpLabel::I0 ? "I0" : l == TpLabel::Iminus ? "I-" : "I+");
            roots.push_back({{"re", t.z.real()}, {"im", t.z.imag()},
                             {"multiplicity", t.multiplicity}, {"label", lab}});
        }
        j["roots"] = roots;
        *json_out = dup_string(j.dump());
    });
}

bwlab_status bwlab_wronskian(const bwlab_model* m, double re_E, double im_E,
                             const bwlab_options* opts, double* re_out, double* im_out) {
    return guarded([&] {
        if (!m || !re_out || !im_out) throw Error(ErrorCode::Config, "null argument");
        WronskianEvaluator w(m->spec, shooting_of(opts));
        cplx v = w(cplx(re_E, im_E));
        *re_out = v.real();
        *im_out = v.imag();
    });
}

bwlab_status bwlab_solve_eigenvalue(const bwlab_model* m, double re_guess, double im_guess,
                                    const bwlab_options* opts, char** out) {
    return guarded([&] {
        if (!m || !out) throw Error(ErrorCode::Config, "null argument");
        SolveOptions so;
        so.shooting = shooting_of(opts);
        if (opts) {
            so.attach_labels = opts->attach_labels != 0;
            so.seed = opts->seed;
        }
        EigenPair p = solve_eigenvalue(m->spec, cplx(re_guess, im_guess), so);
        *out = dup_string(p.to_json());
    });
}

bwlab_status bwlab_spectrum_scan(const bwlab_model* m, double re_lo, double im_lo, double re_hi,
                                 double im_hi, int max_levels, const bwlab_options* opts,
                                 char** out) {
    return guarded([&] {
        if (!m || !out) throw Error(ErrorCode::Config, "null argument");
        ScanOptions so;
        if (opts) {
            if (opts->tol > 0) so.rel_tol = opts->tol;
            so.seed = opts->seed;
            so.attach_labels = opts->attach_labels != 0;
        }
        if (max_levels > 0) so.max_levels = max_levels;
        auto found = spectrum_scan(m->spec, Rect{cplx(re_lo, im_lo), cplx(re_hi, im_hi)}, so);
        json arr = json::array();
        for (auto& p : found) arr.push_back(json::parse(p.to_json()));
        *out = dup_string(arr.dump(2));
    });
}

bwlab_status bwlab_zero_set(const bwlab_model* m, double re_E, double im_E, double re_lo,
                            double im_lo, double re_hi, double im_hi, int expected,
                            const bwlab_options* opts, char** json_out, char** csv_out) {
    return guarded([&] {
        if (!m || !json_out || !csv_out) throw Error(ErrorCode::Config, "null argument");
        EigenfunctionEvaluator::Options eo;
        if (opts && opts->tol > 0) eo.rel_tol = opts->tol;
        if (opts && opts->shoot_L > 0) eo.L = opts->shoot_L;
        EigenfunctionEvaluator ef(m->spec, cplx(re_E, im_E), eo);
        ZeroSet zs = locate_zeros(ef, Rect{cplx(re_lo, im_lo), cplx(re_hi, im_hi)}, expected,
                                  opts ? opts->seed : 0);
        json j;
        j["expected"] = zs.expected;
        j["found"] = zs.zeros.size();
        j["count_mismatch"] = zs.count_mismatch;
        j["count_rho"] = zs.count_rho;
        j["count_eta"] = zs.count_eta;
        j["count_left"] = zs.count_left;
        j["count_right"] = zs.count_right;
        json arr = json::array();
        for (auto& z : zs.zeros)
            arr.push_back({{"re", z.z.real()}, {"im", z.z.imag()},
                           {"class", zero_class_name(z.cls)}, {"residual", z.residual}});
        j["zeros"] = arr;
        *json_out = dup_string(j.dump(2));
        *csv_out = dup_string(zs.to_csv());
    });
}

bwlab_status bwlab_node_zero_set(const bwlab_model* m, double re_E, double im_E,
                                 const bwlab_options* opts, char** json_out, char** csv_out) {
    return guarded([&] {
        if (!m || !json_out || !csv_out) throw Error(ErrorCode::Config, "null argument");
        EigenfunctionEvaluator::Options eo;
        if (opts && opts->tol > 0) eo.rel_tol = opts->tol;
        EigenfunctionEvaluator ef(m->spec, cplx(re_E, im_E), eo);
        ZeroSet zs = node_zero_set(ef, opts ? opts->seed : 0);
        Rect box = default_node_box(m->spec, cplx(re_E, im_E));
        int lower = 0, upper = 0, imag = 0;
        for (auto& z : zs.zeros) {
            if (z.cls == ZeroClass::NodeLower) lower++;
            if (z.cls == ZeroClass::NodeUpper) upper++;
            if (z.cls == ZeroClass::ImaginaryNode) imag++;
        }
        json j;
        j["box"] = {box.lo.real(), box.lo.imag(), box.hi.real(), box.hi.imag()};
        j["nodes"] = zs.zeros.size();
        j["nodes_lower"] = lower;
        j["nodes_upper"] = upper;
        j["nodes_imag"] = imag;
        j["count_rho"] = zs.count_rho;
        j["count_eta"] = zs.count_eta;
        json arr = json::array();
        for (auto& z : zs.zeros)
            arr.push_back({{"re", z.z.real()}, {"im", z.z.imag()},
                           {"class", zero_class_name(z.cls)}, {"residual", z.residual}});
        j["zeros"] = arr;
        *json_out = dup_string(j.dump(2));
        *csv_out = dup_string(zs.to_csv());
    });
}

bwlab_status bwlab_stokes_diagram(const bwlab_model* m, double re_E, double im_E, char** json_out,
                                  char** csv_out) {
    return guarded([&] {
        if (!m || !json_out || !csv_out) throw Error(ErrorCode::Config, "null argument");
        StokesDiagram dg = trace_stokes_lines(m->spec, cplx(re_E, im_E));
        *json_out = dup_string(dg.topology_json());
        *csv_out = dup_string(dg.to_csv());
    });
}

bwlab_status bwlab_critical_energy(const bwlab_model* m, double* value, double* bracket_lo,
                                   double* bracket_hi) {
    return guarded([&] {
        if (!m || !value) throw Error(ErrorCode::Config, "null argument");
        auto ce = critical_energy(m->spec);
        *value = ce.value;
        if (bracket_lo) *bracket_lo = ce.bracket_lo;
        if (bracket_hi) *bracket_hi = ce.bracket_hi;
    });
}

bwlab_status bwlab_escape_asymptote(const bwlab_model* m, double re_E, double im_E,
                                    double* fitted_c, double* residual) {
    return guarded([&] {
        if (!m || !fitted_c) throw Error(ErrorCode::Config, "null argument");
        auto fit = escape_line_asymptote(m->spec, cplx(re_E, im_E));
        *fitted_c = fit.fitted_c;
        if (residual) *residual = fit.residual;
    });
}

bwlab_status bwlab_action_integral(const bwlab_model* m, double re_E, double im_E, double hbar,
                                   int contour_tag, double* re_J, double* im_J, double* err) {
    return guarded([&] {
        if (!m || !re_J || !im_J) throw Error(ErrorCode::Config, "null argument");
        ContourTag tag = contour_tag == 0   ? ContourTag::GammaPlus
                         : contour_tag == 1 ? ContourTag::GammaMinus
                                            : ContourTag::GammaM;
        auto av = action_integral(m->spec, cplx(re_E, im_E), hbar, tag);
        *re_J = av.J.real();
        *im_J = av.J.imag();
        if (err) *err = av.err_estimate;
    });
}

bwlab_status bwlab_wkb_level(const bwlab_model* m, int label, double hbar, int scheme,
                             double* re_E, double* im_E) {
    return guarded([&] {
        if (!m || !re_E || !im_E) throw Error(ErrorCode::Config, "null argument");
        cplx E = solve_wkb_level(m->spec, label, hbar,
                                 scheme == 0 ? WkbScheme::CC1 : WkbScheme::CC3);
        *re_E = E.real();
        *im_E = E.imag();
    });
}

bwlab_status bwlab_quantization_residual(const bwlab_model* m, double re_E, double im_E, int label,
                                         int contour_tag, double* residual) {
    return guarded([&] {
        if (!m || !residual) throw Error(ErrorCode::Config, "null argument");
        EigenfunctionEvaluator ef(m->spec, cplx(re_E, im_E));
        ContourTag tag = contour_tag == 0   ? ContourTag::GammaPlus
                         : contour_tag == 1 ? ContourTag::GammaMinus
                                            : ContourTag::GammaM;
        *residual = exact_quantization_residual(ef, label, tag);
    });
}

bwlab_status bwlab_branch_point(int n, const bwlab_options* opts, char** json_out) {
    return guarded([&] {
        if (!json_out) throw Error(ErrorCode::Config, "null output");
        LocateOptions lo;
        if (opts && opts->tol > 0) lo.rel_tol = opts->tol;
        if (opts) lo.seed = opts->seed;
        BranchPoint bp = locate_branch_point(n, lo);
        *json_out = dup_string(bp.to_json());
    });
}

bwlab_status bwlab_monodromy(int n, double radius_rel, const bwlab_options* opts, char** json_out) {
    return guarded([&] {
        if (!json_out) throw Error(ErrorCode::Config, "null output");
        LocateOptions lo;
        if (opts && opts->tol > 0) lo.rel_tol = opts->tol;
        BranchPoint bp = locate_branch_point(n, lo);
        MonodromyResult mr = monodromy_loop(bp, radius_rel * bp.hbar_n, lo);
        *json_out = dup_string(mr.to_json());
    });
}

bwlab_status bwlab_crossing_report(int n_max, const bwlab_options* opts, char** json_out,
                                   char** markdown_out) {
    return guarded([&] {
        if (!json_out || !markdown_out) throw Error(ErrorCode::Config, "null output");
        LocateOptions lo;
        if (opts && opts->tol > 0) lo.rel_tol = opts->tol;
        CrossingReport rep = crossing_report(n_max, lo);
        *json_out = dup_string(rep.to_json());
        *markdown_out = dup_string(rep.to_markdown());
    });
}

bwlab_status bwlab_trace_branch(const bwlab_model* m, double re_E0, double im_E0,
                                const double* grid, size_t grid_len, const bwlab_options* opts,
                                char** csv_out) {
    return guarded([&] {
        if (!m || !grid || !csv_out || grid_len < 2)
            throw Error(ErrorCode::Config, "bad trace arguments");
        SolveOptions so;
        so.shooting = shooting_of(opts);
        so.attach_labels = false;
        ModelSpec start_spec = with_param(m->spec, grid[0]);
        EigenPair start = solve_eigenvalue(start_spec, cplx(re_E0, im_E0), so);
        std::vector<cplx> g;
        for (size_t i = 0; i < grid_len; ++i) g.push_back(cplx(grid[i], 0.0));
        TraceOptions to;
        if (opts && opts->tol > 0) to.rel_tol = opts->tol;
        BranchCurve c = trace_branch(start, g, to);
        *csv_out = dup_string(c.to_csv());
    });
}

} // extern "C"
