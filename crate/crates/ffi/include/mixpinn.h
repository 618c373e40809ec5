#ifndef MIXPINN_H
#define MIXPINN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MpStatus {
  MP_STATUS_OK = 0,
  MP_STATUS_NULL_POINTER = 1,
  MP_STATUS_INVALID_ARGUMENT = 2,
  MP_STATUS_CONFIG = 3,
  MP_STATUS_IO = 4,
  MP_STATUS_PARSE = 5,
  MP_STATUS_STRUCTURAL = 6,
  MP_STATUS_DOMAIN = 7,
  MP_STATUS_TRAINING = 8,
  MP_STATUS_SOLVER = 9,
  MP_STATUS_PANIC = 10,
} MpStatus;

// Opaque run configuration.
typedef struct MpConfig MpConfig;

// Opaque field grid.
typedef struct MpField MpField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *mp_last_error(void);

// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MpStatus mp_config_load(const char *path, struct MpConfig **out);

// # Safety
// `toml` must be a NUL-terminated string and `out` a writable pointer.
enum MpStatus mp_config_parse(const char *toml, struct MpConfig **out);

// # Safety
// `cfg` must come from this library.
enum MpStatus mp_config_set_epochs(struct MpConfig *cfg, uintptr_t epochs);

// # Safety
// `cfg` must come from this library and not be used afterwards.
void mp_config_free(struct MpConfig *cfg);

// Reference solution on the configured evaluation grid.
//
// # Safety
// `cfg` must come from this library and `out` be a writable pointer.
enum MpStatus mp_solve_fem(const struct MpConfig *cfg, struct MpField **out);

// Trains with `seed` and returns the evaluated field. Divergence is
// reported as `MP_STATUS_TRAINING`.
//
// # Safety
// `cfg` must come from this library and `out` be a writable pointer.
enum MpStatus mp_solve_pinn(const struct MpConfig *cfg, uint64_t seed, struct MpField **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MpStatus mp_field_read_csv(const char *path, struct MpField **out);

// # Safety
// `field` must come from this library and `path` be a NUL-terminated string.
enum MpStatus mp_field_write_csv(const struct MpField *field, const char *path);

// Lattice size; the number of rows is `nx * ny`.
//
// # Safety
// `field` must come from this library; `nx` and `ny` must be writable.
enum MpStatus mp_field_dims(const struct MpField *field, uintptr_t *nx, uintptr_t *ny);

// Copies column `name` (`"x"` and `"y"` give coordinates) into `buf`,
// which must hold exactly `nx * ny` values.
//
// # Safety
// `field` must come from this library, `name` be NUL-terminated and `buf`
// point to `len` writable doubles.
enum MpStatus mp_field_column(const struct MpField *field,
                              const char *name,
                              double *buf,
                              uintptr_t len);

// # Safety
// `field` must come from this library and not be used afterwards.
void mp_field_free(struct MpField *field);

// Max and mean relative difference of `a` against the reference `b` for a
// field column or a group (`displacement`, `stress`, `temperature`,
// `flux`).
//
// # Safety
// `a` and `b` must come from this library, `name` be NUL-terminated and
// `max`, `mean` writable.
enum MpStatus mp_compare(const struct MpField *a,
                         const struct MpField *b,
                         const char *name,
                         double *max,
                         double *mean);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXPINN_H */
