/* plab — plasticity-lab C interface.
 *
 * Every function returns PLAB_OK (0) or a nonzero plab_status; on failure
 * plab_last_error() holds a thread-local description. Strings returned via
 * char** are heap-allocated; release them with plab_string_free().
 */
#ifndef PLAB_H
#define PLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum plab_status {
    PLAB_OK = 0,
    PLAB_EINVAL = 1,       /* invalid argument */
    PLAB_EDIM = 2,         /* dimension mismatch */
    PLAB_ENUMERIC = 3,     /* numerically degenerate input */
    PLAB_EIO = 4,          /* file i/o failure */
    PLAB_EPARSE = 5,       /* malformed config/CSV/dump */
    PLAB_ESTATE = 6,       /* operation invalid in current state */
    PLAB_EUNSUPPORTED = 7, /* not supported */
    PLAB_EINTERNAL = 8,    /* internal invariant broken */
} plab_status;

typedef struct plab_config plab_config;

const char* plab_version(void);

/* Thread-local message for the most recent failure; "" when none. */
const char* plab_last_error(void);

void plab_string_free(char* s);

/* --- configuration ------------------------------------------------------ */

plab_status plab_config_load(const char* path, plab_config** out);
plab_status plab_config_parse(const char* text, plab_config** out);
void plab_config_free(plab_config* cfg);

/* CLI overrides: seed replaces the whole seeds list. */
plab_status plab_config_set_seed(plab_config* cfg, uint64_t seed);
plab_status plab_config_set_out_dir(plab_config* cfg, const char* out_dir);
plab_status plab_config_set_protocol(plab_config* cfg, const char* protocol);

/* Canonical snapshot (fixed key order, %.17g). */
plab_status plab_config_snapshot(const plab_config* cfg, char** out_toml);

/* --- running ------------------------------------------------------------ */

/* Runs the configured protocol. Writes one CSV per output log (plus a
 * .config.toml sidecar each) under the config's out_dir, creating the
 * directory if needed. *out_paths receives the newline-joined CSV paths. */
plab_status plab_run(const plab_config* cfg, char** out_paths);

/* --- analysis ------------------------------------------------------------ */

/* Sliding-window Pearson correlation between two numeric columns of a run
 * log, per seed. task_filter restricts to one task index (-1 = all).
 * Output CSV columns: seed,start_epoch,r,valid (r empty on degenerate
 * windows). out_svg (nullable) additionally renders the across-seed mean
 * with a std band when all seeds yield equal-length series, otherwise one
 * line per seed. */
plab_status plab_analyze(const char* runlog_csv, const char* x_column, const char* y_column,
                         int task_filter, size_t window, size_t stride, const char* out_csv,
                         const char* out_svg);

/* Collapse metrics from a saved feature dump (see README for the format).
 * *out_text receives "name value" lines: nc1, nc2_norm_cv, nc2_angle_dev,
 * nc3, nc4_mismatch. */
plab_status plab_nc_metrics(const char* dump_path, char** out_text);

/* --- fixtures ------------------------------------------------------------ */

typedef struct plab_synth_spec {
    uint64_t seed;
    size_t n_train;
    size_t n_test;
    size_t dim;         /* 784 for mnist kind, 3072 for cifar10 kind */
    size_t num_classes; /* <= 10 */
    size_t modes_per_class;
    double class_sep;
    double amplitude_jitter;
    double noise;
} plab_synth_spec;

/* Writes deterministic synthetic datasets in real file formats.
 * kind "mnist":    <dir>/train-images.idx train-labels.idx test-images.idx
 *                  test-labels.idx
 * kind "cifar10":  <dir>/data_batch_1.bin test_batch.bin
 * kind "features": <dir>/features.dump (nearest-class-mean classifier over
 *                  the synthetic samples, for nc-metrics)
 * *out_paths receives the newline-joined list of files written. */
plab_status plab_write_fixture(const char* dir, const char* kind,
                               const plab_synth_spec* spec, char** out_paths);

#ifdef __cplusplus
}
#endif

#endif /* PLAB_H */
