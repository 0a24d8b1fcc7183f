#ifndef DIRQUANT_H
#define DIRQUANT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DqStatus {
  DQ_STATUS_OK = 0,
  DQ_STATUS_NULL_POINTER = 1,
  DQ_STATUS_INVALID_ARGUMENT = 2,
  DQ_STATUS_DIMENSION_MISMATCH = 3,
  DQ_STATUS_NOT_UNIT = 4,
  DQ_STATUS_FACTORIZATION = 5,
  DQ_STATUS_SIZE_MISMATCH = 6,
  DQ_STATUS_DEGENERATE_CONCENTRATION = 7,
  DQ_STATUS_PARSE = 8,
  DQ_STATUS_NUMERICAL = 9,
  DQ_STATUS_IO = 10,
  DQ_STATUS_BUFFER_TOO_SMALL = 11,
  DQ_STATUS_PANIC = 12,
} DqStatus;

typedef enum DqScore {
  DQ_SCORE_UNIFORM = 0,
  DQ_SCORE_VMF_LOCATION = 1,
  DQ_SCORE_VMF_CONCENTRATION = 2,
  DQ_SCORE_VMF_LOCATION_CONCENTRATION = 3,
  DQ_SCORE_PVMF = 4,
} DqScore;

/*
 A set of unit vectors of common dimension.
 */
typedef struct DqSample DqSample;

/*
 A fitted empirical transport.
 */
typedef struct DqTransport DqTransport;

/*
 Outcome of a test.
 */
typedef struct DqTestResult {
  double statistic;
  double critical_value;
  double p_value;
  size_t df;
  bool reject;
} DqTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *dq_last_error(void);

/*
 Builds a sample from `n` row-major points of dimension `d`.

 # Safety
 `coords` must point to `n * d` doubles and `out` must be writable.
 */
enum DqStatus dq_sample_new(const double *coords, size_t n, size_t d, struct DqSample **out);

/*
 Draws `n` uniform points on `S^(d-1)`.

 # Safety
 `out` must be writable.
 */
enum DqStatus dq_sample_uniform(size_t n, size_t d, uint64_t seed, struct DqSample **out);

/*
 Draws `n` von Mises–Fisher points with location `theta[0..d]`.

 # Safety
 `theta` must point to `d` doubles and `out` must be writable.
 */
enum DqStatus dq_sample_vmf(size_t n,
                            const double *theta,
                            size_t d,
                            double kappa,
                            uint64_t seed,
                            struct DqSample **out);

/*
 # Safety
 `s` must be a live handle or NULL.
 */
size_t dq_sample_len(const struct DqSample *s);

/*
 # Safety
 `s` must be a live handle or NULL.
 */
size_t dq_sample_dim(const struct DqSample *s);

/*
 Copies the points row-major into `buf` (capacity `len` doubles).

 # Safety
 `s` must be a live handle; `buf` must hold `len` doubles.
 */
enum DqStatus dq_sample_coords(const struct DqSample *s, double *buf, size_t len);

/*
 # Safety
 `s` must come from a `dq_sample_*` constructor and not be used afterwards.
 */
void dq_sample_free(struct DqSample *s);

/*
 Fits the empirical transport to an `(n_r, n_s, n_0)` grid; pass
 `n_r = n_s = 0` for the default factorization.

 # Safety
 `s` must be a live handle and `out` writable.
 */
enum DqStatus dq_transport_fit(const struct DqSample *s,
                               size_t n_r,
                               size_t n_s,
                               size_t n_0,
                               uint64_t seed,
                               struct DqTransport **out);

/*
 # Safety
 `t` must be a live handle and `out` writable.
 */
enum DqStatus dq_transport_total_cost(const struct DqTransport *t, double *out);

/*
 Ranks of the observations in input order.

 # Safety
 `t` must be a live handle; `buf` must hold `len` entries.
 */
enum DqStatus dq_transport_ranks(const struct DqTransport *t, size_t *buf, size_t len);

/*
 Signs, row-major `n x d`; zero rows for pole copies.

 # Safety
 `t` must be a live handle; `buf` must hold `len` doubles.
 */
enum DqStatus dq_transport_signs(const struct DqTransport *t, double *buf, size_t len);

/*
 Grid images `F(Z_i)`, row-major `n x d`.

 # Safety
 `t` must be a live handle; `buf` must hold `len` doubles.
 */
enum DqStatus dq_transport_images(const struct DqTransport *t, double *buf, size_t len);

/*
 # Safety
 `t` must be a live handle; `buf` must hold `len` doubles.
 */
enum DqStatus dq_transport_pole(const struct DqTransport *t, double *buf, size_t len);

/*
 # Safety
 `t` must come from `dq_transport_fit` and not be used afterwards.
 */
void dq_transport_free(struct DqTransport *t);

/*
 Cramér–von Mises test of uniformity with Monte Carlo calibration.

 # Safety
 `s` must be a live handle and `out` writable.
 */
enum DqStatus dq_test_uniformity(const struct DqSample *s,
                                 size_t n_r,
                                 size_t n_s,
                                 size_t n_0,
                                 double alpha,
                                 size_t n_mc,
                                 uint64_t seed,
                                 struct DqTestResult *out);

/*
 Rank-score MANOVA (or pvMF) over `m` groups; `score` is a [`DqScore`] value.

 # Safety
 `groups` must point to `m` live sample handles and `out` be writable.
 */
enum DqStatus dq_manova(const struct DqSample *const *groups,
                        size_t m,
                        uint32_t score,
                        size_t n_r,
                        size_t n_s,
                        size_t n_0,
                        double alpha,
                        uint64_t seed,
                        struct DqTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRQUANT_H */
