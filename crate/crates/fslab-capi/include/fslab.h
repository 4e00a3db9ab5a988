#ifndef FSLAB_H
#define FSLAB_H

/* This file is kept in sync with src/lib.rs; regenerate with
 * `cbindgen --config cbindgen.toml --output include/fslab.h` */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/*
 * Conventions:
 * - every fallible call returns FslabStatus; outputs go through `out`
 *   pointers which are written only on FslabStatus_Ok;
 * - handles are created and released by this library only (fslab_*_free);
 *   passing foreign or freed pointers is undefined behavior;
 * - fslab_last_error() describes the most recent failure on the calling
 *   thread, valid until the next failing call.
 */

/* Status codes returned by every fallible function. */
typedef enum FslabStatus {
  FslabStatus_Ok = 0,
  FslabStatus_InvalidArgument = 1,
  FslabStatus_OutOfBounds = 2,
  FslabStatus_EmptyInput = 3,
  FslabStatus_NullPointer = 4,
  FslabStatus_InternalError = 5,
} FslabStatus;

/* Opaque 1D grid set handle. */
typedef struct FslabSet FslabSet;

/* Opaque measure handle. */
typedef struct FslabMeasure FslabMeasure;

/* Message describing the last failure on this thread.  Valid until the
 * next failing call from the same thread. */
const char *fslab_last_error(void);

/* Library version as a static string. */
const char *fslab_version(void);

/* Override the maximum grid level for this process. */
void fslab_set_max_level(uint32_t level);

void fslab_set_free(FslabSet *set);

void fslab_measure_free(FslabMeasure *measure);

/* Iterated arithmetic-progression Cantor set. */
FslabStatus fslab_set_self_similar(uint64_t branches,
                                   uint64_t gap,
                                   uint32_t contraction,
                                   uint32_t depth,
                                   uint64_t offset,
                                   FslabSet **out);

/* Dyadic percolation set (deterministic per seed). */
FslabStatus fslab_set_percolation(uint32_t level,
                                  double survival,
                                  uint64_t seed,
                                  FslabSet **out);

/* The arithmetic-progression pair (A, E) at level log2(n^2). */
FslabStatus fslab_set_ap_family(uint64_t n,
                                uint32_t kappa_num,
                                uint32_t kappa_den,
                                FslabSet **out_a,
                                FslabSet **out_e);

/* Number of cells. */
size_t fslab_set_len(const FslabSet *set);

/* Grid level of the set. */
uint32_t fslab_set_level(const FslabSet *set);

/* Copy up to `cap` cell indices into `buf`; returns the total count. */
size_t fslab_set_cells(const FslabSet *set, int64_t *buf, size_t cap);

/* Number of level-`target` cells meeting the set. */
FslabStatus fslab_set_covering_number(const FslabSet *set,
                                      uint32_t target_level,
                                      uint64_t *out);

/* Resolution-limited dyadic Hausdorff content at tau = tau_num/tau_den
 * and the maximal Frostman mass; by tree duality the two agree. */
FslabStatus fslab_content_duality(const FslabSet *set,
                                  uint32_t tau_num,
                                  uint32_t tau_den,
                                  double *out_content,
                                  double *out_frostman_mass);

/* Least-squares slope of log2 N(set, level) over `levels`. */
FslabStatus fslab_dimension_estimate(const FslabSet *set,
                                     const uint32_t *levels,
                                     size_t n_levels,
                                     double *out_slope);

/* Covering number of the union over c in E of A + c B at the target level
 * (all read as point sets). */
FslabStatus fslab_sumset_covering_number(const FslabSet *a,
                                         const FslabSet *e,
                                         const FslabSet *b,
                                         uint32_t target_level,
                                         uint64_t *out);

/* Covering number of pi_theta(A x B) at the target level, for the dyadic
 * direction theta = theta_num / 2^theta_qlevel. */
FslabStatus fslab_projection_covering_number(const FslabSet *a,
                                             const FslabSet *b,
                                             int64_t theta_num,
                                             uint32_t theta_qlevel,
                                             uint32_t target_level,
                                             uint64_t *out);

/* Number of cells of A x B whose fiber multiplicity for the window
 * [2^-r_level, 2^-cap_exp] reaches `threshold` (`cap_is_infinite` ignores
 * cap_exp and uses an unbounded ball). */
FslabStatus fslab_high_multiplicity_count(const FslabSet *a,
                                          const FslabSet *b,
                                          int64_t theta_num,
                                          uint32_t theta_qlevel,
                                          double threshold,
                                          uint32_t r_level,
                                          int32_t cap_exp,
                                          bool cap_is_infinite,
                                          uint64_t *out);

/* Uniform probability measure on the cells of a set. */
FslabStatus fslab_measure_uniform(const FslabSet *set, FslabMeasure **out);

/* Maximal Frostman measure of a set at tau, normalised to probability. */
FslabStatus fslab_measure_frostman(const FslabSet *set,
                                   uint32_t tau_num,
                                   uint32_t tau_den,
                                   FslabMeasure **out);

/* Shannon entropy (bits) of a probability measure at the target dyadic
 * partition. */
FslabStatus fslab_measure_entropy(const FslabMeasure *measure,
                                  uint32_t target_level,
                                  double *out);

/* Discrete L2 norm of a measure. */
FslabStatus fslab_measure_l2_norm(const FslabMeasure *measure, double *out);

/* Convolution of two measures on the same grid. */
FslabStatus fslab_measure_convolve(const FslabMeasure *a,
                                   const FslabMeasure *b,
                                   FslabMeasure **out);

/* Total mass of a measure. */
FslabStatus fslab_measure_total_mass(const FslabMeasure *measure, double *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FSLAB_H */
