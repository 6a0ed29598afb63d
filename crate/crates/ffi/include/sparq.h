#ifndef SPARQ_H
#define SPARQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SparqStatus {
  SPARQ_STATUS_OK = 0,
  SPARQ_STATUS_NULL_POINTER = 1,
  SPARQ_STATUS_INVALID_ARGUMENT = 2,
  SPARQ_STATUS_REGISTER_ERROR = 3,
  SPARQ_STATUS_GATE_ERROR = 4,
  SPARQ_STATUS_QRAM_ERROR = 5,
  SPARQ_STATUS_PARSE_ERROR = 6,
  SPARQ_STATUS_RUNTIME_ERROR = 7,
  SPARQ_STATUS_PANIC = 8,
} SparqStatus;

// Opaque simulator state.
typedef struct SparqState SparqState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *sparq_last_error(void);

// New state with no registers and a single branch of amplitude 1.
struct SparqState *sparq_state_new(void);

// Releases a state. Null is ignored.
//
// # Safety
// `state` must come from this library and not be used afterwards.
void sparq_state_free(struct SparqState *state);

// Adds a zero-initialized register and writes its id to `out_id`.
//
// # Safety
// Pointers must be valid; `name` must be NUL-terminated.
enum SparqStatus sparq_state_add_register(struct SparqState *state,
                                          const char *name,
                                          uint32_t width,
                                          uint32_t *out_id);

// Looks a register up by name.
//
// # Safety
// Pointers must be valid; `name` must be NUL-terminated.
enum SparqStatus sparq_state_register_id(const struct SparqState *state,
                                         const char *name,
                                         uint32_t *out_id);

// Number of branches; 0 for a null handle.
//
// # Safety
// `state` must be null or valid.
size_t sparq_state_branch_count(const struct SparqState *state);

// Total width of the active registers; 0 for a null handle.
//
// # Safety
// `state` must be null or valid.
uint32_t sparq_state_qubit_count(const struct SparqState *state);

// Sum of squared amplitude moduli.
//
// # Safety
// Pointers must be valid.
enum SparqStatus sparq_state_norm(const struct SparqState *state, double *out);

// Applies the 2x2 unitary `m` (row-major, interleaved re/im, 8 doubles) to
// bit `bit` of register `reg`. Control `k` requires bit `ctrl_bits[k]` of
// register `ctrl_regs[k]` to equal `ctrl_values[k]`; a null `ctrl_values`
// means all ones.
//
// # Safety
// `m` must point to 8 doubles; control arrays must hold `n_ctrl` entries.
enum SparqStatus sparq_apply_unitary(struct SparqState *state,
                                     uint32_t reg,
                                     uint32_t bit,
                                     const double *m,
                                     const uint32_t *ctrl_regs,
                                     const uint32_t *ctrl_bits,
                                     const uint8_t *ctrl_values,
                                     size_t n_ctrl);

// Hadamard on one bit.
//
// # Safety
// `state` must be valid.
enum SparqStatus sparq_apply_h(struct SparqState *state, uint32_t reg, uint32_t bit);

// X on one bit, optionally controlled (see [`sparq_apply_unitary`]).
//
// # Safety
// `state` must be valid; control arrays must hold `n_ctrl` entries.
enum SparqStatus sparq_apply_x(struct SparqState *state,
                               uint32_t reg,
                               uint32_t bit,
                               const uint32_t *ctrl_regs,
                               const uint32_t *ctrl_bits,
                               const uint8_t *ctrl_values,
                               size_t n_ctrl);

// `|a⟩|x⟩ → |a⟩|x ⊕ entries[a]⟩` with `len == 2^addr_width` entries.
//
// # Safety
// `entries` must hold `len` values.
enum SparqStatus sparq_qram_load(struct SparqState *state,
                                 uint32_t addr,
                                 uint32_t data,
                                 uint32_t addr_width,
                                 uint32_t word_width,
                                 const uint64_t *entries,
                                 size_t len);

// Measures a whole register with a seeded generator and collapses the state.
//
// # Safety
// Pointers must be valid.
enum SparqStatus sparq_measure_register(struct SparqState *state,
                                        uint32_t reg,
                                        uint64_t seed,
                                        uint64_t *out_value);

// Writes the dense statevector as interleaved re/im pairs. `len` is the
// number of doubles available and must be at least `2 * 2^qubits`. Register
// 0 occupies the least significant index bits.
//
// # Safety
// `out` must hold `len` doubles.
enum SparqStatus sparq_state_dense(const struct SparqState *state, double *out, size_t len);

// Parses and runs OpenQASM 2.0 source on `threads` workers. On success
// `*out_state` receives the final state, which the caller frees.
//
// # Safety
// `source` must be NUL-terminated; `out_state` must be valid.
enum SparqStatus sparq_run_qasm(const char *source,
                                uint32_t threads,
                                uint64_t seed,
                                struct SparqState **out_state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARQ_H */
