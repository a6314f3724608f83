/* C interface to the tabkanet library.
 *
 * All entry points return an error code; 0 means success. On failure a
 * thread-local message is available via tk_last_error(). Handles are opaque
 * and must be released with their matching free function.
 */
#ifndef TABKANET_H
#define TABKANET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum tk_status {
  TK_OK = 0,
  TK_ERR_CONFIG = 1,     /* bad configuration or arguments */
  TK_ERR_DATA = 2,       /* unreadable/invalid dataset or schema */
  TK_ERR_DIVERGENCE = 3, /* training produced non-finite values */
  TK_ERR_INTERNAL = 4
};

typedef struct tk_config tk_config;

/* Message describing the most recent failure on this thread. Never NULL. */
const char* tk_last_error(void);

const char* tk_version(void);

/* --- configuration ----------------------------------------------------- */

int tk_config_from_json(const char* json_text, tk_config** out);
int tk_config_load(const char* path, tk_config** out);
void tk_config_free(tk_config* cfg);

int tk_config_set_study(tk_config* cfg, const char* study);
int tk_config_set_archs(tk_config* cfg, const char* comma_separated_tags);
int tk_config_set_seed(tk_config* cfg, uint64_t seed);
int tk_config_set_folds(tk_config* cfg, size_t folds);
int tk_config_set_out_dir(tk_config* cfg, const char* dir);
int tk_config_set_bn_column(tk_config* cfg, const char* column);

/* --- studies ------------------------------------------------------------ */

/* Runs the configured study and writes its CSV/summary outputs to the
 * configured output directory. */
int tk_run_study(const tk_config* cfg);

/* --- synthetic data ----------------------------------------------------- */

/* Writes one of the bundled synthetic datasets (CSV plus schema file).
 * Known names are listed by tk_dataset_names(). */
int tk_generate_dataset(const char* name, const char* csv_path,
                        const char* schema_path, uint64_t seed);

/* Newline-separated list of generator names; caller must not free it. */
const char* tk_dataset_names(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TABKANET_H */
