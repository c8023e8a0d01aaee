#ifndef LEVYKB_H
#define LEVYKB_H

/* C interface to levykb. Every function returns an lkb_status; on failure the
 * message is available from lkb_last_error() on the calling thread. */

#include <stddef.h>

#if defined(LEVYKB_BUILDING_LIBRARY)
#define LKB_API __attribute__((visibility("default")))
#else
#define LKB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lkb_status {
  LKB_OK = 0,
  LKB_INVALID_PARAMETERS = 1,
  LKB_FINITE_ACTIVITY = 2,
  LKB_QUADRATURE_FAILURE = 3,
  LKB_MONOTONICITY_VIOLATION = 4,
  LKB_CONDITION_A_VIOLATED = 5,
  LKB_FLOOR_VIOLATED = 6,
  LKB_BRACKET_FAILURE = 7,
  LKB_TRUNCATION_UNREACHABLE = 8,
  LKB_TRUNCATION_INSUFFICIENT = 9,
  LKB_MAX_ON_BOUNDARY = 10,
  LKB_NO_FINITE_CONSTANTS = 11,
  LKB_PRECONDITION_FAILED = 12,
  LKB_DELTA_TOO_COARSE = 13,
  LKB_GRID_COVERAGE_INSUFFICIENT = 14,
  LKB_IO_ERROR = 15,
  LKB_INTERNAL = 16
} lkb_status;

typedef enum lkb_verdict { LKB_PASS = 0, LKB_MARGINAL = 1, LKB_FAIL = 2 } lkb_verdict;

typedef struct lkb_measure lkb_measure;
typedef struct lkb_report lkb_report;

LKB_API const char* lkb_version(void);
LKB_API const char* lkb_status_name(lkb_status s);
/* Message of the last failed call on this thread; "" if none. */
LKB_API const char* lkb_last_error(void);

/* source: preset name, JSON file path, or inline JSON. */
LKB_API lkb_status lkb_measure_create(const char* source, lkb_measure** out);
LKB_API void lkb_measure_destroy(lkb_measure* m);
/* 16 hex digits plus the terminator: buf must hold 17 bytes. */
LKB_API lkb_status lkb_measure_hash(const lkb_measure* m, char* buf, size_t len);

LKB_API lkb_status lkb_psi(const lkb_measure* m, double xi, double* re, double* im);
LKB_API lkb_status lkb_psi_bounds(const lkb_measure* m, double xi, double* psi_l, double* psi_u);
LKB_API lkb_status lkb_rho(const lkb_measure* m, double t, double* out);
/* k-th x-derivative of the density of Z_t at n sorted points. */
LKB_API lkb_status lkb_density(const lkb_measure* m, double t, const double* x, size_t n, int k, double* out);

/* Runs a CLI command (validate, exponents, scales, density, bounds, mc,
 * example, invariants) with a JSON run configuration. */
LKB_API lkb_status lkb_run_command(const char* command, const char* config_json, lkb_report** out);
LKB_API void lkb_report_destroy(lkb_report* r);
LKB_API lkb_verdict lkb_report_verdict(const lkb_report* r);
/* Owned by the report. */
LKB_API const char* lkb_report_json(const lkb_report* r);
LKB_API const char* lkb_report_csv(const lkb_report* r);
/* 0 for PASS, 2 for MARGINAL, 1 for FAIL. */
LKB_API int lkb_report_exit_code(const lkb_report* r);

#ifdef __cplusplus
}
#endif

#endif
