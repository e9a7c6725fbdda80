#include "skillforge.h"

#include <cstring>
#include <sstream>

#include "skillforge/pipeline.hpp"
#include "skillforge/version.hpp"

struct skf_context {
  std::string last_error;
};

struct skf_bundle {
  skf::SkillBundle bundle;
};

namespace {

skf_status guard(skf_context* ctx, const std::function<void()>& body) {
  if (!ctx) return SKF_ERROR_VALIDATION;
  try {
    body();
    ctx->last_error.clear();
    return SKF_OK;
  } catch (const skf::Error& e) {
    ctx->last_error = e.what();
    return static_cast<skf_status>(static_cast<int>(e.status()));
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return SKF_ERROR_VALIDATION;
  }
}

std::vector<std::string> split_csv(const char* csv) {
  std::vector<std::string> out;
  if (!csv || !*csv) return out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

extern "C" {

const char* skf_version(void) { return skf::version(); }

skf_context* skf_context_create(void) { return new skf_context(); }

void skf_context_destroy(skf_context* ctx) { delete ctx; }

const char* skf_last_error(const skf_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

skf_status skf_generate(skf_context* ctx, const char* preset, uint64_t seed,
                        const char* out_dir, int* suggested_k) {
  return guard(ctx, [&] {
    skf::require(preset && out_dir, "preset and out_dir are required");
    skf::GenerateOptions opts;
    opts.preset_name = preset;
    opts.seed = seed;
    opts.out_dir = out_dir;
    const auto result = skf::run_generate(opts);
    if (suggested_k) *suggested_k = result.suggested_components;
  });
}

skf_status skf_train(skf_context* ctx, const char* const* demo_files, size_t n_files,
                     int components, const char* frames_csv, int force, uint64_t seed,
                     const char* skill_id, const char* out_bundle) {
  return guard(ctx, [&] {
    skf::require(demo_files && out_bundle, "demo files and output path are required");
    std::vector<std::string> files(demo_files, demo_files + n_files);
    skf::TrainOptions opts;
    opts.components = components;
    opts.frame_ids = split_csv(frames_csv);
    opts.force = force != 0;
    opts.seed = seed;
    opts.skill_id = skill_id ? skill_id : "skill";
    skf::run_train(files, opts, out_bundle);
  });
}

skf_status skf_bundle_open(skf_context* ctx, const char* path, skf_bundle** out) {
  return guard(ctx, [&] {
    skf::require(path && out, "path and out handle are required");
    auto handle = std::make_unique<skf_bundle>();
    handle->bundle = skf::load_bundle(path);
    *out = handle.release();
  });
}

void skf_bundle_close(skf_bundle* bundle) { delete bundle; }

skf_status skf_bundle_info(skf_context* ctx, const skf_bundle* bundle, char* buf,
                           size_t buflen) {
  return guard(ctx, [&] {
    skf::require(bundle && buf && buflen > 0, "bundle and buffer are required");
    std::ostringstream os;
    os << "{\"id\":\"" << bundle->bundle.id << "\",\"archetype\":\""
       << bundle->bundle.archetype
       << "\",\"components\":" << bundle->bundle.skill.hsmm.num_states()
       << ",\"frames\":" << bundle->bundle.skill.hsmm.gmm.num_frames()
       << ",\"force\":" << (bundle->bundle.stiffness ? "true" : "false") << "}";
    const std::string s = os.str();
    skf::require(s.size() + 1 <= buflen, "info buffer too small");
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

skf_status skf_compose_plan(skf_context* ctx, const char* const* bundle_files, size_t n_bundles,
                            const char* scene_json, const char* goal_json, int horizon,
                            double prune_threshold, const char* out_plan) {
  return guard(ctx, [&] {
    skf::require(bundle_files && scene_json && goal_json && out_plan,
                 "bundles, scene, goal and output path are required");
    std::vector<std::string> bundles(bundle_files, bundle_files + n_bundles);
    skf::ComposePlanOptions opts;
    opts.horizon = horizon;
    opts.prune_threshold = prune_threshold;
    skf::run_compose_plan(bundles, scene_json, goal_json, opts, out_plan);
  });
}

skf_status skf_execute(skf_context* ctx, const char* plan_file, const char* scene_json,
                       const char* out_trace_csv, const char* out_report_json,
                       int* out_success) {
  return guard(ctx, [&] {
    skf::require(plan_file && scene_json, "plan and scene are required");
    skf::ExecuteOptions opts;
    const auto result =
        skf::run_execute(plan_file, scene_json, opts, out_trace_csv ? out_trace_csv : "",
                         out_report_json ? out_report_json : "");
    if (out_success) *out_success = result.report.success ? 1 : 0;
  });
}

skf_status skf_identify(skf_context* ctx, const char* data_csv, double noise, uint64_t seed,
                        const char* excitation_out, const char* out_params_json) {
  return guard(ctx, [&] {
    skf::require(out_params_json, "output path is required");
    skf::IdentifyOptions opts;
    if (data_csv) opts.data_csv = data_csv;
    opts.noise = noise;
    opts.seed = seed;
    if (excitation_out) opts.excitation_out = excitation_out;
    skf::run_identify(opts, out_params_json);
  });
}

skf_status skf_solve_pose(skf_context* ctx, const char* keypoints_jsonl,
                          const char* intrinsics_json, const char* model_json,
                          double confidence_floor, const char* out_pose_json) {
  return guard(ctx, [&] {
    skf::require(keypoints_jsonl && intrinsics_json && model_json && out_pose_json,
                 "keypoints, intrinsics, model and output path are required");
    skf::PoseOptions opts;
    opts.confidence_floor = confidence_floor;
    skf::run_pose(keypoints_jsonl, intrinsics_json, model_json, opts, out_pose_json);
  });
}

skf_status skf_refine(skf_context* ctx, const char* bundle_file, int budget, uint64_t seed,
                      const char* scene_json, const char* out_bundle,
                      const char* out_trace_csv) {
  return guard(ctx, [&] {
    skf::require(bundle_file && out_bundle, "bundle and output path are required");
    skf::RefineOptions opts;
    opts.budget = budget;
    opts.seed = seed;
    if (scene_json) opts.scene_file = scene_json;
    skf::run_refine(bundle_file, opts, out_bundle, out_trace_csv ? out_trace_csv : "");
  });
}

}  // extern "C"
