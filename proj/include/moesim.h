/*
 * moesim — deterministic desk-scale simulator and component library for
 * disaggregated MoE serving: prefill/decode/caching split, large-scale
 * expert parallelism, microbatch pipelining, speculative decoding economics,
 * disaggregated memory pooling, and INT8 quantization math.
 *
 * C ABI over the C++ core. All objects are opaque handles; every function
 * returns a moesim_status, with details from moesim_last_error(). Strings
 * returned through out-parameters are heap-allocated and must be released
 * with moesim_string_free().
 */

#ifndef MOESIM_H
#define MOESIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum moesim_status {
    MOESIM_OK = 0,
    MOESIM_ERR_VALIDATION = 1,  /* a domain invariant or table check failed  */
    MOESIM_ERR_CONFIG = 2,      /* config missing, unparsable, unknown keys  */
    MOESIM_ERR_IO = 3,
    MOESIM_ERR_INVALID_ARG = 4,
    MOESIM_ERR_INTERNAL = 5
} moesim_status;

typedef struct moesim_config moesim_config;
typedef struct moesim_report moesim_report;

const char* moesim_version(void);

/* Thread-local message for the most recent failure in this thread. */
const char* moesim_last_error(void);

/* ---- configuration ----------------------------------------------------- */

moesim_status moesim_config_load(const char* path, moesim_config** out);
moesim_status moesim_config_parse(const char* json_text, moesim_config** out);
moesim_status moesim_config_default(moesim_config** out);
/* Full config (defaults included) as JSON. */
moesim_status moesim_config_dump(const moesim_config* cfg, char** json_out);
void moesim_config_free(moesim_config* cfg);

/* ---- scenarios ---------------------------------------------------------- */

moesim_status moesim_run(const moesim_config* cfg, moesim_report** out);
/* One report per value; `parallel` != 0 runs points concurrently with
 * byte-identical results. */
moesim_status moesim_sweep(const moesim_config* cfg, const char* axis, const double* values,
                           size_t num_values, int parallel, moesim_report** out);

moesim_status moesim_report_json(const moesim_report* report, char** json_out);
moesim_status moesim_report_csv(const moesim_report* report, char** csv_out);
void moesim_report_free(moesim_report* report);

/* ---- standalone tools ---------------------------------------------------- */

/* Prefill->decode connection map as CSV (decode_dp_rank, decode_tp_rank,
 * prefill_tp_rank) plus per-prefill-rank counts. */
moesim_status moesim_pd_map(int prefill_tp, int decode_tp, int decode_dp, char** csv_out);

/* Quantizes a matrix file ("rows cols" header, row-major values);
 * granularity is "token" or "channel". */
moesim_status moesim_quantize_file(const char* matrix_path, const char* granularity,
                                   char** json_out);

/* Fits the fused-EP latency law to a CSV of ep_degree,latency_us,bandwidth_gbps
 * rows (optional header). */
moesim_status moesim_calibrate_plane_csv(const char* csv_path, char** json_out);

/* Runs the closed-form reproduction suite; *all_passed is 1 when every check
 * holds. The text report has one line per check. */
moesim_status moesim_validate_tables(const moesim_config* cfg_or_null, char** text_out,
                                     int* all_passed);

void moesim_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MOESIM_H */
