#include "slicetrack/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slicetrack/errors.hpp"

namespace slicetrack {

using nlohmann::json;

namespace {

constexpr double kDeg = M_PI / 180.0;

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      raise(Errc::bad_config, "unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_vec3(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (a.size() != 3) raise(Errc::bad_config, std::string(key) + " needs 3 entries");
  for (int i = 0; i < 3; ++i) out[i] = a[i].get<double>();
}

void get_dims(const json& j, const char* key, std::array<int, 3>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (a.size() != 3) raise(Errc::bad_config, std::string(key) + " needs 3 entries");
  for (int i = 0; i < 3; ++i) out[i] = a[i].get<int>();
}

void parse_phantom(const json& j, PhantomConfig& p) {
  expect_keys(j,
              {"anat_dims", "anat_spacing_mm", "epi_dims", "epi_spacing_mm", "volumes",
               "block_design", "cycles", "volumes_per_cycle", "blur_sigma_px",
               "noise_fraction", "activation_fraction", "activation_gain",
               "rotation_cap_deg", "translation_cap_mm", "frequency_cycles", "acquisition",
               "static_rotation_deg", "static_offset_mm", "rotation_center_mm", "seed"},
              "phantom");
  get_dims(j, "anat_dims", p.anat_dims);
  get_vec3(j, "anat_spacing_mm", p.anat_spacing);
  get_dims(j, "epi_dims", p.epi_dims);
  get_vec3(j, "epi_spacing_mm", p.epi_spacing);
  get_to(j, "volumes", p.volumes);
  get_to(j, "block_design", p.block_design);
  get_to(j, "cycles", p.cycles);
  get_to(j, "volumes_per_cycle", p.volumes_per_cycle);
  get_to(j, "blur_sigma_px", p.blur_sigma_px);
  get_to(j, "noise_fraction", p.noise_fraction);
  get_to(j, "activation_fraction", p.activation_fraction);
  get_to(j, "activation_gain", p.activation_gain);
  get_to(j, "rotation_cap_deg", p.rotation_cap_deg);
  get_to(j, "translation_cap_mm", p.translation_cap_mm);
  if (j.contains("frequency_cycles")) {
    const auto& a = j.at("frequency_cycles");
    if (a.size() != 2) raise(Errc::bad_config, "frequency_cycles needs 2 entries");
    p.frequency_cycles = {a[0].get<double>(), a[1].get<double>()};
  }
  if (j.contains("acquisition"))
    p.acquisition = acquisition_from_name(j.at("acquisition").get<std::string>());
  get_vec3(j, "static_rotation_deg", p.static_rotation_deg);
  get_vec3(j, "static_offset_mm", p.static_offset_mm);
  get_vec3(j, "rotation_center_mm", p.rotation_center_mm);
  get_to(j, "seed", p.seed);
  p.validate();
}

void parse_track(const json& j, TrackConfig& t) {
  expect_keys(j,
              {"particles", "half_width", "bins", "screen_fraction", "screen_tau_scale",
               "screen_percentile", "pilot_sigma_deg", "pilot_sigma_mm",
               "calibration_slices", "seed", "simplex"},
              "track");
  get_to(j, "particles", t.particles);
  get_to(j, "half_width", t.half_width);
  get_to(j, "bins", t.bins);
  get_to(j, "screen_fraction", t.screen_fraction);
  get_to(j, "screen_tau_scale", t.screen_tau_scale);
  get_to(j, "screen_percentile", t.screen_percentile);
  get_to(j, "pilot_sigma_deg", t.pilot_sigma_deg);
  get_to(j, "pilot_sigma_mm", t.pilot_sigma_mm);
  get_to(j, "calibration_slices", t.calibration_slices);
  get_to(j, "seed", t.seed);
  if (j.contains("simplex")) {
    const json& s = j.at("simplex");
    expect_keys(s, {"step_deg", "step_mm", "ftol", "xtol", "max_evaluations"},
                "track.simplex");
    double step_deg = 0.5, step_mm = 0.5;
    get_to(s, "step_deg", step_deg);
    get_to(s, "step_mm", step_mm);
    t.simplex.initial_step << step_deg * kDeg, step_deg * kDeg, step_deg * kDeg, step_mm,
        step_mm, step_mm;
    get_to(s, "ftol", t.simplex.ftol);
    get_to(s, "xtol", t.simplex.xtol);
    get_to(s, "max_evaluations", t.simplex.max_evaluations);
  }
  t.validate();
}

void parse_activate(const json& j, ActivateConfig& a) {
  expect_keys(j, {"permutations", "threshold", "seed"}, "activate");
  get_to(j, "permutations", a.permutations);
  get_to(j, "threshold", a.threshold);
  get_to(j, "seed", a.seed);
  if (a.permutations < 1) raise(Errc::bad_config, "permutations must be >= 1");
  if (!(a.threshold > 0.0 && a.threshold < 1.0))
    raise(Errc::bad_config, "threshold must lie in (0, 1)");
}

void parse_evaluate(const json& j, EvaluateConfig& e) {
  expect_keys(j, {"atr_splits", "seed"}, "evaluate");
  get_to(j, "atr_splits", e.atr_splits);
  get_to(j, "seed", e.seed);
  if (e.atr_splits < 2) raise(Errc::bad_config, "atr_splits must be >= 2");
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& where) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(Errc::bad_config, "invalid JSON in " + where);
  expect_keys(j, {"schema_version", "phantom", "track", "activate", "evaluate"}, where);
  if (!j.contains("schema_version"))
    raise(Errc::bad_config, "config is missing schema_version");
  if (j.at("schema_version").get<int>() != 1)
    raise(Errc::bad_config, "unsupported config schema version");

  PipelineConfig cfg;
  if (j.contains("phantom")) parse_phantom(j.at("phantom"), cfg.phantom);
  if (j.contains("track")) parse_track(j.at("track"), cfg.track);
  if (j.contains("activate")) parse_activate(j.at("activate"), cfg.activate);
  if (j.contains("evaluate")) parse_evaluate(j.at("evaluate"), cfg.evaluate);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_failure, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string default_config_json() {
  const PipelineConfig c;
  json j;
  j["schema_version"] = 1;
  j["phantom"] = {
      {"anat_dims", c.phantom.anat_dims},
      {"anat_spacing_mm", {c.phantom.anat_spacing[0], c.phantom.anat_spacing[1],
                           c.phantom.anat_spacing[2]}},
      {"epi_dims", c.phantom.epi_dims},
      {"epi_spacing_mm", {c.phantom.epi_spacing[0], c.phantom.epi_spacing[1],
                          c.phantom.epi_spacing[2]}},
      {"volumes", c.phantom.volumes},
      {"block_design", c.phantom.block_design},
      {"cycles", c.phantom.cycles},
      {"volumes_per_cycle", c.phantom.volumes_per_cycle},
      {"blur_sigma_px", c.phantom.blur_sigma_px},
      {"noise_fraction", c.phantom.noise_fraction},
      {"activation_fraction", c.phantom.activation_fraction},
      {"activation_gain", c.phantom.activation_gain},
      {"rotation_cap_deg", c.phantom.rotation_cap_deg},
      {"translation_cap_mm", c.phantom.translation_cap_mm},
      {"frequency_cycles", c.phantom.frequency_cycles},
      {"acquisition", acquisition_name(c.phantom.acquisition)},
      {"seed", c.phantom.seed},
  };
  j["track"] = {
      {"particles", c.track.particles},
      {"half_width", c.track.half_width},
      {"bins", c.track.bins},
      {"screen_fraction", c.track.screen_fraction},
      {"screen_tau_scale", c.track.screen_tau_scale},
      {"screen_percentile", c.track.screen_percentile},
      {"pilot_sigma_deg", c.track.pilot_sigma_deg},
      {"pilot_sigma_mm", c.track.pilot_sigma_mm},
      {"calibration_slices", c.track.calibration_slices},
      {"seed", c.track.seed},
      {"simplex",
       {{"step_deg", 0.5},
        {"step_mm", 0.5},
        {"ftol", c.track.simplex.ftol},
        {"xtol", c.track.simplex.xtol},
        {"max_evaluations", c.track.simplex.max_evaluations}}},
  };
  j["activate"] = {{"permutations", c.activate.permutations},
                   {"threshold", c.activate.threshold},
                   {"seed", c.activate.seed}};
  j["evaluate"] = {{"atr_splits", c.evaluate.atr_splits}, {"seed", c.evaluate.seed}};
  return j.dump(2) + "\n";
}

}  // namespace slicetrack
