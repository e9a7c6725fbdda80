/* C interface to the skillforge engine.
 *
 * All entry points are exported from the shared library with C linkage and
 * communicate through opaque handles and status codes. Every call that can
 * fail takes a context whose last-error text describes the most recent
 * failure on that context.
 */
#ifndef SKILLFORGE_H
#define SKILLFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum skf_status {
  SKF_OK = 0,
  SKF_ERROR_VALIDATION = 2, /* bad inputs, malformed files, contract violations */
  SKF_ERROR_NUMERICAL = 3,  /* degenerate models, solver failures */
  SKF_ERROR_PLANNING = 4    /* unreachable goals, truncated executions */
} skf_status;

typedef struct skf_context skf_context;
typedef struct skf_bundle skf_bundle;

const char* skf_version(void);

skf_context* skf_context_create(void);
void skf_context_destroy(skf_context* ctx);
/* Message of the last failed call on this context; empty string if none. */
const char* skf_last_error(const skf_context* ctx);

/* Synthetic demonstrations: writes <preset>_demo_<i>.jsonl plus scene.json and
 * goal.json into out_dir. suggested_k receives the preset's component count
 * (may be NULL). */
skf_status skf_generate(skf_context* ctx, const char* preset, uint64_t seed,
                        const char* out_dir, int* suggested_k);

/* Train a skill bundle from demo JSONL files. frames_csv is a comma-separated
 * frame-id list ("" uses every frame found in the demos); force != 0 enables
 * the attractor transform and stiffness optimization. */
skf_status skf_train(skf_context* ctx, const char* const* demo_files, size_t n_files,
                     int components, const char* frames_csv, int force, uint64_t seed,
                     const char* skill_id, const char* out_bundle);

/* Bundle handles: load + validate, query a one-line JSON summary. */
skf_status skf_bundle_open(skf_context* ctx, const char* path, skf_bundle** out);
void skf_bundle_close(skf_bundle* bundle);
skf_status skf_bundle_info(skf_context* ctx, const skf_bundle* bundle, char* buf,
                           size_t buflen);

/* Compose the bundles in order, plan against scene/goal JSON files, and write
 * the plan file. horizon <= 0 derives the horizon from the duration models. */
skf_status skf_compose_plan(skf_context* ctx, const char* const* bundle_files, size_t n_bundles,
                            const char* scene_json, const char* goal_json, int horizon,
                            double prune_threshold, const char* out_plan);

/* Execute a plan on the simulated arm. out_success (may be NULL) receives 1
 * when the evaluator reports success. */
skf_status skf_execute(skf_context* ctx, const char* plan_file, const char* scene_json,
                       const char* out_trace_csv, const char* out_report_json,
                       int* out_success);

/* Dynamics identification on the planar three-link fixture. data_csv may be
 * NULL to simulate excitation data internally (with the given torque-noise
 * fraction); excitation_out may be NULL. */
skf_status skf_identify(skf_context* ctx, const char* data_csv, double noise, uint64_t seed,
                        const char* excitation_out, const char* out_params_json);

/* Keypoint 6D pose solve: keypoints JSONL + intrinsics JSON + annotated model
 * JSON -> pose JSON. */
skf_status skf_solve_pose(skf_context* ctx, const char* keypoints_jsonl,
                          const char* intrinsics_json, const char* model_json,
                          double confidence_floor, const char* out_pose_json);

/* Bayesian skill refinement on the simulated insertion harness. budget 0
 * copies the bundle unchanged. scene_json may be NULL when the skill only
 * uses the global frame. */
skf_status skf_refine(skf_context* ctx, const char* bundle_file, int budget, uint64_t seed,
                      const char* scene_json, const char* out_bundle,
                      const char* out_trace_csv);

#ifdef __cplusplus
}
#endif

#endif /* SKILLFORGE_H */
