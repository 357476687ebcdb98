#ifndef HYBRID_QKD_H
#define HYBRID_QKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HqStatus {
  HQ_STATUS_OK = 0,
  HQ_STATUS_NULL_POINTER = 1,
  HQ_STATUS_INVALID_ARGUMENT = 2,
  HQ_STATUS_TRUNCATION = 3,
  HQ_STATUS_INVALID_STATE = 4,
  HQ_STATUS_INSUFFICIENT_STATISTICS = 5,
  HQ_STATUS_EMPTY_KEY = 6,
  HQ_STATUS_MISSING_SETTING = 7,
  HQ_STATUS_DEGENERATE_COUNTS = 8,
  HQ_STATUS_CODEC = 9,
  HQ_STATUS_BUFFER_TOO_SMALL = 10,
  HQ_STATUS_PANIC = 11,
} HqStatus;

typedef enum HqEncoding {
  HQ_ENCODING_POLARIZATION_ONLY = 0,
  HQ_ENCODING_HYBRID = 1,
} HqEncoding;

/**
 * Protocol configuration.
 */
typedef struct HqConfig HqConfig;

/**
 * Classical-channel message.
 */
typedef struct HqMessage HqMessage;

/**
 * Completed session: tallies and the current sifted key.
 */
typedef struct HqSession HqSession;

typedef struct HqSourceParams {
  double rep_rate;
  double mean_photon_mu;
  double g2;
  double eta_det;
  double dark_rate;
  double gate_seconds;
} HqSourceParams;

typedef struct HqSessionStats {
  uint64_t rounds;
  uint64_t detected;
  uint64_t multiphoton;
  uint64_t key_length;
} HqSessionStats;

typedef struct HqQberReport {
  uint64_t sample_size;
  uint64_t error_count;
  double qber;
  double std_error;
} HqQberReport;

/**
 * Count record for one tomography setting. `setting` is 0..=5 for
 * H, V, D, A, R, L.
 */
typedef struct HqCount {
  uint8_t setting;
  uint64_t shots;
  uint64_t clicks;
} HqCount;

/**
 * Reconstructed 2x2 density matrix, row-major in the (H, V) basis.
 */
typedef struct HqTomographyResult {
  double rho_re[4];
  double rho_im[4];
  double log_likelihood;
  uint64_t iterations;
  bool converged;
} HqTomographyResult;

typedef struct HqHbtResult {
  double g2;
  uint64_t n_pulses;
  uint64_t zero_delay;
  uint64_t adjacent;
} HqHbtResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hq_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to fit) and returns the full message length in
 * bytes, excluding the NUL. Returns 0 if there is no error.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t hq_last_error_message(char *buf, size_t len);

void hq_clear_last_error(void);

/**
 * Polarization-only QBER `sin^2(theta) / 2`.
 */
double hq_theoretical_qber(double theta);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum HqStatus hq_secret_key_fraction(double qber, double *out);

/**
 * # Safety
 * `fidelities` must hold `len` values; `out` must be valid.
 */
enum HqStatus hq_qber_from_fidelities(const double *fidelities, size_t len, double *out);

/**
 * Exact sifted-key QBER with ideal detectors. `encoding` is an
 * [`HqEncoding`] value.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HqStatus hq_exact_qber(uint32_t encoding,
                            double theta,
                            double depolarizing_p,
                            double basis_bias,
                            double *out);

struct HqSourceParams hq_source_params_default(void);

struct HqSourceParams hq_source_params_ideal(void);

/**
 * New configuration with default values; free with [`hq_config_free`].
 */
struct HqConfig *hq_config_new(void);

/**
 * # Safety
 * `config` must come from [`hq_config_new`] or be null.
 */
void hq_config_free(struct HqConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_rounds(struct HqConfig *config, uint64_t n_rounds);

/**
 * `encoding` is an [`HqEncoding`] value.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_encoding(struct HqConfig *config, uint32_t encoding);

/**
 * Bob's platform angle in radians.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_theta(struct HqConfig *config, double theta);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_seed(struct HqConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_depolarizing(struct HqConfig *config, double p);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_source(struct HqConfig *config, struct HqSourceParams source);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_basis_bias(struct HqConfig *config, double z_probability);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HqStatus hq_config_set_discard_multiphoton(struct HqConfig *config, bool discard);

/**
 * Simulates and sifts a full session.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer. On success
 * `*out` receives a session to release with [`hq_session_free`].
 */
enum HqStatus hq_session_run(const struct HqConfig *config, struct HqSession **out);

/**
 * # Safety
 * `session` must come from [`hq_session_run`] or be null.
 */
void hq_session_free(struct HqSession *session);

/**
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum HqStatus hq_session_stats(const struct HqSession *session, struct HqSessionStats *out);

/**
 * Samples `fraction` of the key for QBER estimation and discards the
 * sampled bits from the session's key.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum HqStatus hq_session_estimate_qber(struct HqSession *session,
                                       double fraction,
                                       uint64_t seed,
                                       struct HqQberReport *out);

/**
 * Copies the current key as 0/1 bytes. `len` must equal the key length.
 *
 * # Safety
 * `alice` and `bob` must each be valid for `len` bytes.
 */
enum HqStatus hq_session_key(const struct HqSession *session,
                             uint8_t *alice,
                             uint8_t *bob,
                             size_t len);

/**
 * Basis announcement; each entry is 0 for Z or 1 for Y.
 *
 * # Safety
 * `bases` must hold `len` bytes; `out` must be valid.
 */
enum HqStatus hq_message_basis_announce(const uint8_t *bases, size_t len, struct HqMessage **out);

/**
 * # Safety
 * `mask` must hold `len` bytes (0 or 1); `out` must be valid.
 */
enum HqStatus hq_message_detected_mask(const uint8_t *mask, size_t len, struct HqMessage **out);

/**
 * # Safety
 * `indices` must hold `len` values; `out` must be valid.
 */
enum HqStatus hq_message_sample_indices(const uint32_t *indices,
                                        size_t len,
                                        struct HqMessage **out);

/**
 * # Safety
 * `bits` must hold `len` bytes (0 or 1); `out` must be valid.
 */
enum HqStatus hq_message_sample_bits(const uint8_t *bits, size_t len, struct HqMessage **out);

/**
 * # Safety
 * `out` must be valid.
 */
enum HqStatus hq_message_qber_report(double qber,
                                     uint32_t sample_size,
                                     uint32_t error_count,
                                     struct HqMessage **out);

/**
 * # Safety
 * `message` must be a handle from this library or null.
 */
void hq_message_free(struct HqMessage *message);

/**
 * Wire type tag (0x01..=0x05), or 0 for a null handle.
 *
 * # Safety
 * `message` must be a live handle or null.
 */
uint8_t hq_message_type(const struct HqMessage *message);

/**
 * Number of items (bases, bits or indices); 1 for a QBER report.
 *
 * # Safety
 * `message` must be a live handle or null.
 */
size_t hq_message_len(const struct HqMessage *message);

/**
 * Copies the items of a list message as `u32` (bits and bases as 0/1).
 *
 * # Safety
 * `out` must be valid for `len` values, where `len` is [`hq_message_len`].
 */
enum HqStatus hq_message_items(const struct HqMessage *message, uint32_t *out, size_t len);

/**
 * # Safety
 * `message` must be a live handle; output pointers must be valid.
 */
enum HqStatus hq_message_get_qber_report(const struct HqMessage *message,
                                         double *qber,
                                         uint32_t *sample_size,
                                         uint32_t *error_count);

/**
 * Encodes one frame. `*written` receives the frame size; if `cap` is too
 * small nothing is copied and [`HqStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes (or null with `cap == 0`);
 * `written` must be valid.
 */
enum HqStatus hq_message_encode(const struct HqMessage *message,
                                uint8_t *buf,
                                size_t cap,
                                size_t *written);

/**
 * Decodes exactly one frame.
 *
 * # Safety
 * `bytes` must hold `len` bytes; `out` must be valid.
 */
enum HqStatus hq_message_decode(const uint8_t *bytes, size_t len, struct HqMessage **out);

/**
 * Maximum-likelihood reconstruction of the analysis qubit.
 *
 * # Safety
 * `counts` must hold `len` records; `out` must be valid.
 */
enum HqStatus hq_mle_reconstruct(const struct HqCount *counts,
                                 size_t len,
                                 uint64_t max_iters,
                                 double tol,
                                 uint64_t seed,
                                 struct HqTomographyResult *out);

/**
 * Hanbury-Brown-Twiss estimate of g2(0) from `n_pulses` simulated pulses.
 *
 * # Safety
 * `source` and `out` must be valid pointers.
 */
enum HqStatus hq_hbt_estimate(const struct HqSourceParams *source,
                              uint64_t n_pulses,
                              uint64_t seed,
                              struct HqHbtResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRID_QKD_H */
