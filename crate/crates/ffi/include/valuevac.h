#ifndef VALUEVAC_H
#define VALUEVAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VvStatus {
  VV_STATUS_OK = 0,
  VV_STATUS_NULL_ARGUMENT = 1,
  VV_STATUS_INVALID_UTF8 = 2,
  VV_STATUS_INVALID_ARGUMENT = 3,
  /**
   * scenario, config or backend could not be loaded
   */
  VV_STATUS_LOAD = 4,
  /**
   * override refused in the current mode
   */
  VV_STATUS_REJECTED = 5,
  /**
   * no decision found (parser) or made in time (simulation)
   */
  VV_STATUS_NO_DECISION = 6,
  VV_STATUS_PANIC = 7,
} VvStatus;

typedef enum VvDecision {
  VV_DECISION_CLEAN = 0,
  VV_DECISION_WAIT = 1,
  VV_DECISION_DOCK = 2,
  VV_DECISION_CONTINUE = 3,
  VV_DECISION_INTERRUPT = 4,
} VvDecision;

/**
 * Opaque simulation handle.
 */
typedef struct VvSimulation VvSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation of a bundled scenario name or scenario file.
 * `config_path` may be NULL for the offline mock backend.
 *
 * # Safety
 * `scenario` and `config_path` are NULL or valid NUL-terminated strings;
 * `out` is a valid pointer.
 */
enum VvStatus vv_simulation_new(const char *scenario,
                                const char *config_path,
                                struct VvSimulation **out);

/**
 * # Safety
 * `sim` is NULL or a handle from [`vv_simulation_new`] not yet freed.
 */
void vv_simulation_free(struct VvSimulation *sim);

/**
 * Advances `ticks` control ticks of 50 ms.
 *
 * # Safety
 * `sim` is a live handle.
 */
enum VvStatus vv_simulation_step(struct VvSimulation *sim, uint64_t ticks);

/**
 * Ticks until the next decision is logged or `max_sim_seconds` pass.
 *
 * # Safety
 * `sim` is a live handle; `out` is a valid pointer.
 */
enum VvStatus vv_simulation_run_until_decision(struct VvSimulation *sim,
                                               double max_sim_seconds,
                                               enum VvDecision *out);

/**
 * Current state as JSON; free with [`vv_string_free`].
 *
 * # Safety
 * `sim` is a live handle; `out` is a valid pointer.
 */
enum VvStatus vv_simulation_state_json(struct VvSimulation *sim, char **out);

/**
 * The run log so far as JSONL; free with [`vv_string_free`].
 *
 * # Safety
 * `sim` is a live handle; `out` is a valid pointer.
 */
enum VvStatus vv_simulation_log_jsonl(struct VvSimulation *sim, char **out);

/**
 * Applies an operator override (`CLEAN`, `WAIT`, `DOCK`, ...). The log id
 * of the override record goes to `out_record_id` when it is not NULL.
 *
 * # Safety
 * `sim` is a live handle; strings are valid; `out_record_id` is NULL or
 * valid.
 */
enum VvStatus vv_simulation_override(struct VvSimulation *sim,
                                     const char *operator_id,
                                     const char *token,
                                     uint64_t *out_record_id);

/**
 * Extracts the decision from model output for `mode` (`observation`,
 * `cleaning` or `docking`).
 *
 * # Safety
 * Strings are valid; `out` is a valid pointer.
 */
enum VvStatus vv_parse_decision(const char *text, const char *mode, enum VvDecision *out);

/**
 * Runs `trials` first-decision trials and writes the consistency report
 * as JSON. `config_path` may be NULL for the mock backend.
 *
 * # Safety
 * Strings are NULL or valid; `out` is a valid pointer.
 */
enum VvStatus vv_run_trials_json(const char *scenario,
                                 const char *config_path,
                                 uint32_t trials,
                                 char **out);

/**
 * Message of the last failure on this thread, or NULL. Free with
 * [`vv_string_free`].
 */
char *vv_last_error_message(void);

/**
 * # Safety
 * `s` is NULL or a string returned by this library, not yet freed.
 */
void vv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VALUEVAC_H */
