/* bwlab - PT-symmetric cubic oscillator spectral laboratory.
 *
 * C interface to the core library: opaque model handles, status codes, and
 * JSON/CSV payloads allocated by the library (free with bwlab_string_free).
 * All functions return BWLAB_OK on success; on failure a thread-local message
 * is available from bwlab_last_error().
 */
#ifndef BWLAB_H
#define BWLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bwlab_status {
    BWLAB_OK = 0,
    BWLAB_ERR_CONFIG = 1,
    BWLAB_ERR_DOMAIN = 2,
    BWLAB_ERR_CONVERGENCE = 3,
    BWLAB_ERR_ACCURACY = 4,
    BWLAB_ERR_GEOMETRY = 5,
    BWLAB_ERR_STIFFNESS = 6,
    BWLAB_ERR_NOT_FOUND = 7,
    BWLAB_ERR_INTERNAL = 8
} bwlab_status;

typedef struct bwlab_model bwlab_model;

typedef struct bwlab_options {
    double tol;     /* integrator relative tolerance (default 1e-12) */
    double shoot_L; /* 0 = automatic truncation radius */
    uint64_t seed;  /* deterministic jitter seed */
    int attach_labels;
} bwlab_options;

const char* bwlab_version(void);
const char* bwlab_last_error(void);
void bwlab_string_free(char* s);
void bwlab_options_default(bwlab_options* opts);

/* model handles ---------------------------------------------------------- */
bwlab_status bwlab_model_create_json(const char* json_text, bwlab_model** out);
bwlab_status bwlab_model_create_hbar(double hbar, bwlab_model** out);
bwlab_status bwlab_model_create_beta(double beta_re, double beta_im, bwlab_model** out);
bwlab_status bwlab_model_create_alpha(double alpha_re, double alpha_im, bwlab_model** out);
bwlab_status bwlab_model_create_kdelta(double k, double delta, bwlab_model** out);
bwlab_status bwlab_model_create_real_cubic(bwlab_model** out);
void bwlab_model_destroy(bwlab_model* m);
bwlab_status bwlab_model_to_json(const bwlab_model* m, char** json_out);

/* models: potential and algebraic data ----------------------------------- */
bwlab_status bwlab_potential(const bwlab_model* m, double re_z, double im_z, double* re_out,
                             double* im_out);
/* out arrays sized 3 (count written to n_out; entries re,im interleaved in zs) */
bwlab_status bwlab_stationary_points(const bwlab_model* m, double* zs, int* n_out);
bwlab_status bwlab_turning_points_json(const bwlab_model* m, double re_E, double im_E, char** json_out);

/* eigensolver ------------------------------------------------------------- */
bwlab_status bwlab_wronskian(const bwlab_model* m, double re_E, double im_E,
                             const bwlab_options* opts, double* re_out, double* im_out);
bwlab_status bwlab_solve_eigenvalue(const bwlab_model* m, double re_guess, double im_guess,
                                    const bwlab_options* opts, char** eigenpair_json_out);
bwlab_status bwlab_spectrum_scan(const bwlab_model* m, double re_lo, double im_lo, double re_hi,
                                 double im_hi, int max_levels, const bwlab_options* opts,
                                 char** json_array_out);

/* zeros -------------------------------------------------------------------*/
bwlab_status bwlab_zero_set(const bwlab_model* m, double re_E, double im_E, double re_lo,
                            double im_lo, double re_hi, double im_hi, int expected,
                            const bwlab_options* opts, char** json_out, char** csv_out);
/* zeros located inside the default node window of a converged level */
bwlab_status bwlab_node_zero_set(const bwlab_model* m, double re_E, double im_E,
                                 const bwlab_options* opts, char** json_out, char** csv_out);

/* semiclassics ------------------------------------------------------------*/
bwlab_status bwlab_stokes_diagram(const bwlab_model* m, double re_E, double im_E, char** json_out,
                                  char** csv_out);
bwlab_status bwlab_critical_energy(const bwlab_model* m, double* value, double* bracket_lo,
                                   double* bracket_hi);
bwlab_status bwlab_escape_asymptote(const bwlab_model* m, double re_E, double im_E,
                                    double* fitted_c, double* residual);
/* contour_tag: 0 = gamma+, 1 = gamma-, 2 = Gamma_m */
bwlab_status bwlab_action_integral(const bwlab_model* m, double re_E, double im_E, double hbar,
                                   int contour_tag, double* re_J, double* im_J, double* err);
/* scheme: 0 = CC1 (half contour), 1 = CC3 (two halves) */
bwlab_status bwlab_wkb_level(const bwlab_model* m, int label, double hbar, int scheme,
                             double* re_E, double* im_E);
bwlab_status bwlab_quantization_residual(const bwlab_model* m, double re_E, double im_E, int label,
                                         int contour_tag, double* residual);

/* continuation ------------------------------------------------------------*/
bwlab_status bwlab_branch_point(int n, const bwlab_options* opts, char** json_out);
/* radius_rel: circle radius as a fraction of hbar_n */
bwlab_status bwlab_monodromy(int n, double radius_rel, const bwlab_options* opts, char** json_out);
bwlab_status bwlab_crossing_report(int n_max, const bwlab_options* opts, char** json_out,
                                   char** markdown_out);
/* trace one branch over a real parameter grid (family parameter of m) */
bwlab_status bwlab_trace_branch(const bwlab_model* m, double re_E0, double im_E0,
                                const double* grid, size_t grid_len, const bwlab_options* opts,
                                char** csv_out);

#ifdef __cplusplus
}
#endif

#endif /* BWLAB_H */
