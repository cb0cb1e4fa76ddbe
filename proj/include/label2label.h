#ifndef LABEL2LABEL_H
#define LABEL2LABEL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define L2L_API __declspec(dllexport)
#else
#define L2L_API __attribute__((visibility("default")))
#endif

/* Status values returned by every function. */
typedef enum l2l_status {
  L2L_OK = 0,
  L2L_ERR_ARGUMENT = 1, /* null handle or pointer, undersized buffer */
  L2L_ERR_CONFIG = 2,   /* unknown key, bad value, missing required setting */
  L2L_ERR_DATA = 3,     /* manifest, tensor file, label or checkpoint problems */
  L2L_ERR_NUMERIC = 4,  /* non-finite loss or out-of-domain arithmetic */
  L2L_ERR_SHAPE = 5,    /* tensor shapes or indices inconsistent */
  L2L_ERR_IO = 6,
  L2L_ERR_INTERNAL = 7
} l2l_status;

typedef struct l2l_config_s* l2l_config;
typedef struct l2l_model_s* l2l_model;

/* Message of the most recent failure on this thread; empty after success. */
L2L_API const char* l2l_last_error(void);
L2L_API const char* l2l_version(void);
/* Process exit code for a status: 0 ok, 2 usage/config/data, 3 numeric, 1 other. */
L2L_API int l2l_exit_code(int status);

L2L_API int l2l_config_create(l2l_config* out);
L2L_API void l2l_config_free(l2l_config config);
L2L_API int l2l_config_set(l2l_config config, const char* key, const char* value);
/* Copies the value as text, NUL terminated. *needed receives the full length
   including the terminator even when buf is too small. */
L2L_API int l2l_config_get(l2l_config config, const char* key, char* buf, size_t buf_len, size_t* needed);
L2L_API int l2l_config_load_file(l2l_config config, const char* path);

/* generate | train | eval | sweep | export-attention; writes run.json under out. */
L2L_API int l2l_run_command(const char* command, l2l_config config);
/* Replays a run.json; out may be NULL to reuse the recorded output directory. */
L2L_API int l2l_rerun(const char* run_json_path, const char* out);

L2L_API int l2l_model_load(const char* checkpoint_dir, l2l_model* out);
L2L_API void l2l_model_free(l2l_model model);
L2L_API int l2l_model_num_attributes(l2l_model model, size_t* out);
L2L_API int l2l_model_image_size(l2l_model model, size_t* size, size_t* channels);
/* images: batch × S × S × C row-major; probs receives batch × M final-head
   probabilities. */
L2L_API int l2l_model_predict(l2l_model model, const double* images, size_t batch, double* probs, size_t probs_len);

L2L_API int l2l_tensor_write(const char* path, const size_t* dims, size_t rank, const double* data);
/* Two-call pattern: pass data = NULL to learn rank and numel first. */
L2L_API int l2l_tensor_read(const char* path, size_t* dims, size_t max_rank, size_t* rank, double* data,
                            size_t data_len, size_t* numel);

#ifdef __cplusplus
}
#endif

#endif
