#ifndef HOMOTOPY_PLANNER_H
#define HOMOTOPY_PLANNER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HpStatus {
  HP_STATUS_OK = 0,
  HP_STATUS_NULL_POINTER = 1,
  HP_STATUS_INVALID_UTF8 = 2,
  HP_STATUS_IO = 3,
  HP_STATUS_PARSE = 4,
  HP_STATUS_VALIDATION = 5,
  HP_STATUS_GEOMETRY = 6,
  HP_STATUS_INFEASIBLE = 7,
  HP_STATUS_LIMIT = 8,
  HP_STATUS_SOLVER = 9,
  HP_STATUS_OUT_OF_RANGE = 10,
  HP_STATUS_PANIC = 11,
} HpStatus;

/**
 * Which per-step series of a trajectory to copy out.
 */
typedef enum HpSeries {
  HP_SERIES_PROGRESS = 0,
  HP_SERIES_VELOCITY = 1,
  HP_SERIES_CONTROL = 2,
} HpSeries;

/**
 * A validated game specification.
 */
typedef struct HpScenario HpScenario;

/**
 * A solved plan with its solver statistics.
 */
typedef struct HpSolution HpSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *hp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hp_version(void);

/**
 * Loads and validates a scenario JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HpStatus hp_scenario_load(const char *path, struct HpScenario **out);

/**
 * Parses scenario JSON text. Geometry conflicts may only use inline paths.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HpStatus hp_scenario_parse(const char *json, struct HpScenario **out);

/**
 * Opens a scenario compiled into the library, e.g. `round_kackertstrasse`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum HpStatus hp_scenario_bundled(const char *name, struct HpScenario **out);

/**
 * # Safety
 * `scenario` must come from this library and not be used afterwards.
 */
void hp_scenario_free(struct HpScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a live handle.
 */
uintptr_t hp_scenario_player_count(const struct HpScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a live handle.
 */
uintptr_t hp_scenario_pair_count(const struct HpScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a live handle.
 */
uintptr_t hp_scenario_horizon(const struct HpScenario *scenario);

/**
 * Sets the homotopy mode: `free`, `none`, or `fixed:<bits>`.
 *
 * # Safety
 * `scenario` must be a live handle; `mode` a NUL-terminated string.
 */
enum HpStatus hp_scenario_set_mode(struct HpScenario *scenario, const char *mode);

/**
 * Solves the scenario's MIQP. `max_nodes` of 0 and `time_limit_s` ≤ 0 mean
 * no limit. A limit hit with a plan in hand still returns `Ok`.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum HpStatus hp_solve(const struct HpScenario *scenario,
                       uintptr_t max_nodes,
                       double time_limit_s,
                       struct HpSolution **out);

/**
 * # Safety
 * `solution` must come from this library and not be used afterwards.
 */
void hp_solution_free(struct HpSolution *solution);

/**
 * Joint objective value; NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double hp_solution_objective(const struct HpSolution *solution);

/**
 * # Safety
 * `solution` must be null or a live handle.
 */
uintptr_t hp_solution_nodes(const struct HpSolution *solution);

/**
 * Remaining optimality gap; zero when solved to optimality.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double hp_solution_gap(const struct HpSolution *solution);

/**
 * Copies the homotopy bits (one byte per pair) into `bits`. `len` must be at
 * least the pair count; `written` receives the count. Solutions without
 * homotopy variables write zero entries.
 *
 * # Safety
 * `bits` must hold `len` bytes; `written` must be writable.
 */
enum HpStatus hp_solution_class(const struct HpSolution *solution,
                                uint8_t *bits,
                                uintptr_t len,
                                uintptr_t *written);

/**
 * Copies one player's series (`N + 1` values for progress and velocity,
 * `N` for control) into `buf`; `written` receives the count.
 *
 * # Safety
 * `buf` must hold `len` doubles; `written` must be writable.
 */
enum HpStatus hp_solution_series(const struct HpSolution *solution,
                                 uintptr_t player,
                                 enum HpSeries series,
                                 double *buf,
                                 uintptr_t len,
                                 uintptr_t *written);

/**
 * Checks whether class `bits` (one byte per pair, 0 or 1) is a deadlock.
 * `is_deadlock` receives 1 for a deadlock and 0 otherwise.
 *
 * # Safety
 * `bits` must hold `len` bytes; `is_deadlock` must be writable.
 */
enum HpStatus hp_deadlock_check(const struct HpScenario *scenario,
                                const uint8_t *bits,
                                uintptr_t len,
                                int32_t *is_deadlock);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMOTOPY_PLANNER_H */
