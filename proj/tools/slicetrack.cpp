// slicetrack: slice-level head-motion tracking and activation analysis for
// slice-sequential functional imaging.
//
// Pipeline: simulate -> calibrate -> track -> reconstruct -> activate ->
// evaluate -> report. Every command is a pure function of (inputs, config,
// seed); reruns are byte-identical regardless of thread count.

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slicetrack/analysis.hpp"
#include "slicetrack/config.hpp"
#include "slicetrack/errors.hpp"
#include "slicetrack/io.hpp"
#include "slicetrack/kernels.hpp"
#include "slicetrack/parallel.hpp"
#include "slicetrack/phantom.hpp"
#include "slicetrack/registration.hpp"
#include "slicetrack/svg.hpp"
#include "slicetrack/tracking.hpp"

namespace st = slicetrack;
using st::fs::path;

namespace {

constexpr double kDeg = M_PI / 180.0;

st::PipelineConfig load_config_or_default(const std::string& config_path) {
  if (config_path.empty()) return st::PipelineConfig{};
  return st::load_config(config_path);
}

void apply_seed_override(st::PipelineConfig& cfg, const std::optional<std::uint64_t>& seed) {
  if (!seed) return;
  cfg.phantom.seed = *seed;
  cfg.track.seed = *seed;
  cfg.activate.seed = *seed;
  cfg.evaluate.seed = *seed;
}

// Reconstruction grid: the anatomical bounding box sampled at the EPI
// resolution taken from the slice geometry.
st::GridSpec recon_grid(const st::Dataset& ds) {
  const st::Volume& a = ds.anat;
  st::Vec3 spacing(ds.slices.front().geometry.pixel_spacing_u,
                   ds.slices.front().geometry.pixel_spacing_v, a.voxel_size[2] * 2.0);
  // Slice plane spacing from two distinct slice indices, when available.
  const st::Slice* s0 = nullptr;
  const st::Slice* s1 = nullptr;
  for (const st::Slice& s : ds.slices) {
    if (!s0 && s.geometry.slice_index == 0) s0 = &s;
    if (!s1 && s.geometry.slice_index == 1) s1 = &s;
  }
  if (s0 && s1) spacing[2] = s1->geometry.plane_origin[2] - s0->geometry.plane_origin[2];

  const double ext[3] = {a.voxel_size[0] * a.nx, a.voxel_size[1] * a.ny,
                         a.voxel_size[2] * a.nz};
  st::GridSpec g;
  for (int i = 0; i < 3; ++i) {
    g.dims[i] = std::max(2, static_cast<int>(std::floor(ext[i] / spacing[i] + 0.5)));
    g.spacing[i] = spacing[i];
    g.origin[i] = a.origin[i] - 0.5 * a.voxel_size[i] + 0.5 * spacing[i];
  }
  return g;
}

std::vector<st::RigidParams> params_per_slice(const std::vector<st::TrajectoryRow>& rows,
                                              std::size_t t_count) {
  if (rows.size() != t_count)
    st::raise(st::Errc::shape_mismatch,
              "trajectory has " + std::to_string(rows.size()) + " rows, dataset has " +
                  std::to_string(t_count) + " slices");
  std::vector<st::RigidParams> out(t_count);
  std::vector<bool> seen(t_count, false);
  for (const st::TrajectoryRow& r : rows) {
    if (r.t < 1 || r.t > static_cast<long>(t_count) || seen[r.t - 1])
      st::raise(st::Errc::malformed_header, "trajectory rows must cover t = 1..T once");
    seen[r.t - 1] = true;
    out[r.t - 1] = r.params;
  }
  return out;
}

// ---- commands -------------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  st::PipelineConfig cfg = load_config_or_default(config_path);
  apply_seed_override(cfg, seed);
  st::OutputGuard guard;
  guard.track(out_dir);
  const st::PhantomDataset ds = st::generate(cfg.phantom);
  st::write_dataset(out_dir, ds, cfg.phantom);
  guard.commit();
  std::cout << "dataset written to " << out_dir << " (" << ds.slices.size() << " slices)\n";
  return 0;
}

int cmd_calibrate(const std::string& dataset_dir, const std::string& out_file,
                  const std::string& config_path, std::optional<std::uint64_t> seed) {
  st::PipelineConfig cfg = load_config_or_default(config_path);
  apply_seed_override(cfg, seed);
  const st::Dataset ds = st::read_dataset(dataset_dir);
  st::OutputGuard guard;
  guard.track(out_file);
  const st::Calibration cal = st::calibrate_all(ds.slices, ds.anat, cfg.track);
  st::write_calibration_json(out_file, cal);
  guard.commit();
  std::cout << "calibration written to " << out_file << "\n";
  return 0;
}

int cmd_track(const std::string& dataset_dir, const std::string& method,
              const std::string& calibration_file, const std::string& out_file,
              const std::string& config_path, std::optional<std::uint64_t> seed) {
  st::PipelineConfig cfg = load_config_or_default(config_path);
  apply_seed_override(cfg, seed);
  const st::Dataset ds = st::read_dataset(dataset_dir);

  st::Calibration cal;
  if (method != "none") {
    if (calibration_file.empty())
      st::raise(st::Errc::calibration_missing,
                "track --method " + method + " needs --calibration");
    cal = st::read_calibration_json(calibration_file);
  }

  std::vector<st::TrajectoryRow> rows;
  rows.reserve(ds.slices.size());
  auto base_row = [&](const st::Slice& s) {
    st::TrajectoryRow r;
    r.t = s.time_index;
    r.m = s.volume_index;
    r.n = s.geometry.slice_index;
    return r;
  };

  if (method == "none") {
    for (const st::Slice& s : ds.slices) {
      st::TrajectoryRow r = base_row(s);
      r.status = "none";
      rows.push_back(r);
    }
  } else if (method == "v2v" || method == "s2v") {
    const auto groups = st::group_by_volume(ds.slices);
    std::vector<st::RegistrationResult> per_volume(groups.size());
    st::RigidParams prev;  // volumes initialize from the previous volume's fit
    for (std::size_t m = 0; m < groups.size(); ++m) {
      const st::Volume vm = st::stack_slices_to_volume(groups[m]);
      per_volume[m] =
          st::register_volume(vm, ds.anat, prev, cal, cfg.track.simplex, cfg.track.bins);
      prev = per_volume[m].params;
    }
    if (method == "v2v") {
      for (const st::Slice& s : ds.slices) {
        st::TrajectoryRow r = base_row(s);
        r.params = per_volume[s.volume_index - 1].params;
        r.objective = per_volume[s.volume_index - 1].objective;
        rows.push_back(r);
      }
    } else {
      const double tau = [&] {
        std::vector<st::Volume> vols;
        for (const auto& g : groups) vols.push_back(st::stack_slices_to_volume(g));
        return st::screening_threshold(st::mean_volume(vols), cfg.track);
      }();
      rows.resize(ds.slices.size());
      st::parallel_for(static_cast<long>(ds.slices.size()), [&](long b, long e, int) {
        for (long i = b; i < e; ++i) {
          const st::Slice& s = ds.slices[i];
          const bool ok = st::screen_slice(s, tau, cfg.track);
          const st::RegistrationResult rr =
              st::register_slice(s, ds.anat, per_volume[s.volume_index - 1].params, cal,
                                 cfg.track.simplex, cfg.track.bins, ok);
          st::TrajectoryRow r = base_row(s);
          r.params = rr.params;
          r.objective = rr.objective;
          if (rr.low_confidence) r.status = "low_confidence";
          rows[i] = r;
        }
      });
    }
  } else if (method == "hmt") {
    const st::TrackResult tr = st::hmt_track(ds.slices, ds.anat, cal, cfg.track);
    rows = st::trajectory_rows(tr);
  } else {
    st::raise(st::Errc::bad_config, "unknown method '" + method + "'");
  }

  st::OutputGuard guard;
  guard.track(out_file);
  st::write_trajectory_csv(out_file, rows);
  guard.commit();
  std::cout << "trajectory (" << method << ") written to " << out_file << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& dataset_dir, const std::string& trajectory_file,
                    const std::string& calibration_file, const std::string& out_dir) {
  const st::Dataset ds = st::read_dataset(dataset_dir);
  const auto rows = st::read_trajectory_csv(trajectory_file);
  const auto params = params_per_slice(rows, ds.slices.size());
  const st::Calibration cal = st::read_calibration_json(calibration_file);
  const st::GridSpec grid = recon_grid(ds);

  st::OutputGuard guard;
  guard.track(out_dir);
  const st::ReconstructedSeries recon = st::reconstruct_volumes(ds.slices, params, cal, grid);
  for (std::size_t m = 0; m < recon.volumes.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "vol_%04zu.vol", m + 1);
    st::write_volume(path(out_dir) / name, recon.volumes[m]);
    std::snprintf(name, sizeof name, "wgt_%04zu.vol", m + 1);
    st::write_volume(path(out_dir) / name, recon.weights[m]);
  }
  st::write_text_atomic(path(out_dir) / "recon.json",
                        std::string("{\n  \"schema_version\": 1,\n  \"volumes\": ") +
                            std::to_string(recon.volumes.size()) + "\n}\n");
  guard.commit();
  std::cout << recon.volumes.size() << " corrected volumes written to " << out_dir << "\n";
  return 0;
}

st::ReconstructedSeries read_recon_dir(const std::string& recon_dir, std::size_t m_count) {
  st::ReconstructedSeries recon;
  for (std::size_t m = 1; m <= m_count; ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "vol_%04zu.vol", m);
    recon.volumes.push_back(st::read_volume(path(recon_dir) / name));
    std::snprintf(name, sizeof name, "wgt_%04zu.vol", m);
    recon.weights.push_back(st::read_volume(path(recon_dir) / name));
  }
  return recon;
}

int cmd_activate(const std::string& recon_dir, const std::string& design_file,
                 const std::string& out_dir, const std::string& config_path,
                 std::optional<std::uint64_t> seed) {
  st::PipelineConfig cfg = load_config_or_default(config_path);
  apply_seed_override(cfg, seed);
  const std::vector<int> labels = st::read_design_csv(design_file);
  const st::ReconstructedSeries recon = read_recon_dir(recon_dir, labels.size());

  st::OutputGuard guard;
  guard.track(out_dir);
  const st::ActivationMap map = st::permutation_test(
      recon, labels, cfg.activate.permutations, cfg.activate.threshold, cfg.activate.seed);

  const st::GridSpec& g = map.grid;
  auto as_volume = [&](auto getter) {
    st::Volume v = g.empty();
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = getter(i);
    return v;
  };
  st::write_volume(path(out_dir) / "pvalues.vol",
                   as_volume([&](std::size_t i) { return map.p[i]; }));
  st::write_volume(path(out_dir) / "tsign.vol", as_volume([&](std::size_t i) {
                     return static_cast<double>(map.t_sign[i]);
                   }));
  st::write_volume(path(out_dir) / "active.vol", as_volume([&](std::size_t i) {
                     return static_cast<double>(map.active[i]);
                   }));
  st::write_volume(path(out_dir) / "missing.vol", as_volume([&](std::size_t i) {
                     return static_cast<double>(map.missing[i]);
                   }));

  std::string csv = "ix,iy,iz,p,t_sign,active,missing\n";
  std::size_t i = 0;
  for (int iz = 0; iz < g.dims[2]; ++iz)
    for (int iy = 0; iy < g.dims[1]; ++iy)
      for (int ix = 0; ix < g.dims[0]; ++ix, ++i) {
        csv += std::to_string(ix) + "," + std::to_string(iy) + "," + std::to_string(iz) +
               "," + st::format_double(map.p[i]) + "," + std::to_string(map.t_sign[i]) + "," +
               std::to_string(map.active[i]) + "," + std::to_string(map.missing[i]) + "\n";
      }
  st::write_text_atomic(path(out_dir) / "pvalues.csv", csv);
  st::write_text_atomic(path(out_dir) / "activation.json",
                        std::string("{\n  \"schema_version\": 1,\n  \"permutations\": ") +
                            std::to_string(map.permutations) +
                            ",\n  \"threshold\": " + st::format_double(map.threshold) +
                            "\n}\n");
  guard.commit();
  std::cout << "activation map written to " << out_dir << "\n";
  return 0;
}

// Truth mask resampled to the activation/reconstruction grid by
// nearest-neighbor lookup of each voxel center.
std::vector<std::uint8_t> truth_on_grid(const st::Volume& mask, const st::GridSpec& g) {
  std::vector<std::uint8_t> out(
      static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2], 0);
  std::size_t i = 0;
  for (int iz = 0; iz < g.dims[2]; ++iz)
    for (int iy = 0; iy < g.dims[1]; ++iy)
      for (int ix = 0; ix < g.dims[0]; ++ix, ++i) {
        const st::Vec3 r =
            g.origin + st::Vec3(ix * g.spacing[0], iy * g.spacing[1], iz * g.spacing[2]);
        const int mx =
            static_cast<int>(std::floor((r[0] - mask.origin[0]) / mask.voxel_size[0] + 0.5));
        const int my =
            static_cast<int>(std::floor((r[1] - mask.origin[1]) / mask.voxel_size[1] + 0.5));
        const int mz =
            static_cast<int>(std::floor((r[2] - mask.origin[2]) / mask.voxel_size[2] + 0.5));
        if (mx < 0 || mx >= mask.nx || my < 0 || my >= mask.ny || mz < 0 || mz >= mask.nz)
          continue;
        out[i] = mask.at(mx, my, mz) != 0.0 ? 1 : 0;
      }
  return out;
}

int cmd_evaluate(const std::string& dataset_dir, const std::string& out_dir,
                 const std::string& trajectory_file, const std::string& calibration_file,
                 const std::string& activation_dir, const std::string& recon_dir,
                 const std::string& config_path, std::optional<std::uint64_t> seed) {
  st::PipelineConfig cfg = load_config_or_default(config_path);
  apply_seed_override(cfg, seed);
  const st::Dataset ds = st::read_dataset(dataset_dir);

  st::OutputGuard guard;
  guard.track(out_dir);
  st::fs::create_directories(out_dir);
  bool wrote_any = false;

  if (!trajectory_file.empty()) {
    if (!ds.truth_traj || !ds.truth_cal)
      st::raise(st::Errc::calibration_missing,
                "voxel-distance evaluation needs ground-truth sidecars");
    if (calibration_file.empty())
      st::raise(st::Errc::calibration_missing, "--trajectory needs --calibration");
    const st::Calibration cal_est = st::read_calibration_json(calibration_file);
    const auto rows = st::read_trajectory_csv(trajectory_file);
    const auto params = params_per_slice(rows, ds.slices.size());

    std::string csv = "t,m,n,dt_mm\n";
    double sum = 0.0;
    for (std::size_t i = 0; i < ds.slices.size(); ++i) {
      const st::Slice& s = ds.slices[i];
      const double d = st::average_voxel_distance(s.geometry, params[i], cal_est,
                                                  (*ds.truth_traj)[i], *ds.truth_cal);
      sum += d;
      csv += std::to_string(s.time_index) + "," + std::to_string(s.volume_index) + "," +
             std::to_string(s.geometry.slice_index) + "," + st::format_double(d) + "\n";
    }
    st::write_text_atomic(path(out_dir) / "dt_series.csv", csv);
    st::write_text_atomic(
        path(out_dir) / "dt_mean.csv",
        "mean_dt_mm,slices\n" +
            st::format_double(sum / static_cast<double>(ds.slices.size())) + "," +
            std::to_string(ds.slices.size()) + "\n");
    wrote_any = true;
  }

  if (!activation_dir.empty()) {
    if (!ds.activation_mask)
      st::raise(st::Errc::degenerate_truth, "ROC needs the activation_mask sidecar");
    const st::Volume pv = st::read_volume(path(activation_dir) / "pvalues.vol");
    const st::Volume miss = st::read_volume(path(activation_dir) / "missing.vol");
    st::GridSpec g{{pv.nx, pv.ny, pv.nz}, pv.voxel_size, pv.origin};
    const auto truth = truth_on_grid(*ds.activation_mask, g);
    std::vector<std::uint8_t> missing(pv.data.size());
    for (std::size_t i = 0; i < missing.size(); ++i) missing[i] = miss.data[i] != 0.0;
    const st::RocCurve roc = st::roc_auc(pv.data, truth, missing);

    std::string csv = "fpr,tpr\n";
    for (std::size_t i = 0; i < roc.fpr.size(); ++i)
      csv += st::format_double(roc.fpr[i]) + "," + st::format_double(roc.tpr[i]) + "\n";
    st::write_text_atomic(path(out_dir) / "roc_curve.csv", csv);
    st::write_text_atomic(path(out_dir) / "auc.csv", "auc\n" + st::format_double(roc.auc) + "\n");
    wrote_any = true;
  }

  if (!recon_dir.empty()) {
    if (!ds.design) st::raise(st::Errc::degenerate_truth, "ATR needs the design sidecar");
    const std::vector<int>& labels = *ds.design;
    const st::ReconstructedSeries recon = read_recon_dir(recon_dir, labels.size());
    const auto splits =
        st::split_replications(labels, cfg.evaluate.atr_splits, cfg.evaluate.seed);

    std::vector<st::ActivationMap> maps;
    for (const auto& split : splits) {
      st::ReconstructedSeries sub;
      std::vector<int> sub_labels;
      for (int m : split) {
        sub.volumes.push_back(recon.volumes[m]);
        sub.weights.push_back(recon.weights[m]);
        sub_labels.push_back(labels[m]);
      }
      maps.push_back(st::permutation_test(sub, sub_labels, cfg.activate.permutations,
                                          cfg.activate.threshold, cfg.activate.seed));
    }

    std::vector<int> r_counts;
    const std::size_t n_vox = maps.front().p.size();
    for (std::size_t v = 0; v < n_vox; ++v) {
      bool missing = false;
      int r = 0;
      for (const auto& m : maps) {
        missing = missing || m.missing[v];
        r += m.active[v];
      }
      if (!missing) r_counts.push_back(r);
    }
    const st::MixtureFit fit = st::atr_fit(r_counts, cfg.evaluate.atr_splits);
    st::write_text_atomic(path(out_dir) / "atr.csv",
                          "lambda,p_a,p_i,log_likelihood,splits,voxels\n" +
                              st::format_double(fit.lambda) + "," +
                              st::format_double(fit.p_active) + "," +
                              st::format_double(fit.p_inactive) + "," +
                              st::format_double(fit.log_likelihood) + "," +
                              std::to_string(cfg.evaluate.atr_splits) + "," +
                              std::to_string(r_counts.size()) + "\n");
    wrote_any = true;
  }

  if (!wrote_any)
    st::raise(st::Errc::bad_config,
              "evaluate needs at least one of --trajectory, --activation, --recon");
  guard.commit();
  std::cout << "metrics written to " << out_dir << "\n";
  return 0;
}

std::map<std::string, std::string> parse_labeled(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const std::string& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      st::raise(st::Errc::bad_config, "expected label=path, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

int cmd_report(const std::string& out_dir, const std::string& truth_file,
               const std::vector<std::string>& tracks, const std::vector<std::string>& dts,
               const std::vector<std::string>& rocs) {
  const auto track_files = parse_labeled(tracks);
  const auto dt_files = parse_labeled(dts);
  const auto roc_files = parse_labeled(rocs);
  if (track_files.empty() && dt_files.empty() && roc_files.empty())
    st::raise(st::Errc::bad_config, "report needs at least one --track/--dt/--roc input");

  st::OutputGuard guard;
  guard.track(out_dir);
  st::fs::create_directories(out_dir);
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::optional<std::vector<st::TrajectoryRow>> truth;
  if (!truth_file.empty()) truth = st::read_trajectory_csv(truth_file);

  for (const auto& [label, file] : track_files) {
    const auto rows = st::read_trajectory_csv(file);
    st::SvgPlot plot(760, 420, "estimated vs true rotation angles (" + label + ")",
                     "slice time t", "angle (deg)");
    std::vector<double> ts;
    for (const auto& r : rows) ts.push_back(static_cast<double>(r.t));
    const char* names[3] = {"alpha", "beta", "gamma"};
    for (int c = 0; c < 3; ++c) {
      if (truth) {
        std::vector<double> tv, tt;
        for (const auto& r : *truth) {
          tt.push_back(static_cast<double>(r.t));
          tv.push_back(
              (c == 0 ? r.params.alpha : c == 1 ? r.params.beta : r.params.gamma) / kDeg);
        }
        plot.add_line(tt, tv, "black", c == 0 ? "truth" : "", false);
      }
      std::vector<double> est;
      for (const auto& r : rows)
        est.push_back(
            (c == 0 ? r.params.alpha : c == 1 ? r.params.beta : r.params.gamma) / kDeg);
      plot.add_line(ts, est, colors[c], std::string(names[c]) + " (" + label + ")", true);
    }
    st::write_text_atomic(path(out_dir) / ("trajectory_" + label + ".svg"), plot.render());
  }

  if (!dt_files.empty()) {
    st::SvgPlot plot(560, 420, "average voxel distance by method", "method", "D_t (mm)");
    int slot = 0;
    for (const auto& [label, file] : dt_files) {
      const auto rows = st::read_csv(file);
      std::vector<double> d;
      for (std::size_t i = 1; i < rows.size(); ++i) d.push_back(std::stod(rows[i].back()));
      if (d.empty()) st::raise(st::Errc::malformed_header, "empty dt series " + file);
      std::sort(d.begin(), d.end());
      auto q = [&](double f) {
        const double pos = f * (d.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - lo;
        return lo + 1 < d.size() ? d[lo] * (1 - frac) + d[lo + 1] * frac : d[lo];
      };
      plot.add_box(slot + 1.0, d.front(), q(0.25), q(0.5), q(0.75), d.back(),
                   colors[slot % 6], label);
      ++slot;
    }
    st::write_text_atomic(path(out_dir) / "dt_box.svg", plot.render());
  }

  if (!roc_files.empty()) {
    st::SvgPlot plot(560, 420, "activation detection ROC", "false positive rate",
                     "true positive rate");
    int slot = 0;
    for (const auto& [label, file] : roc_files) {
      const auto rows = st::read_csv(file);
      std::vector<double> fpr, tpr;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        fpr.push_back(std::stod(rows[i][0]));
        tpr.push_back(std::stod(rows[i][1]));
      }
      plot.add_line(fpr, tpr, colors[slot % 6], label, slot % 2 == 1);
      ++slot;
    }
    st::write_text_atomic(path(out_dir) / "roc.svg", plot.render());
  }

  guard.commit();
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slice-level head-motion tracking for slice-sequential functional imaging"};
  app.require_subcommand(1);

  int threads = 0;
  std::string backend = "auto";
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--backend", backend, "kernel backend: auto|scalar|avx2|neon");

  std::string config_path, dataset_dir, out_path, method = "hmt", calibration_file;
  std::string trajectory_file, activation_dir, recon_dir, design_file, truth_file;
  std::vector<std::string> tracks, dts, rocs;
  std::optional<std::uint64_t> seed;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "seed override"); };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--config", config_path, "pipeline config JSON");
  sim->add_option("--out", out_path, "output dataset directory")->required();
  add_seed(sim);

  CLI::App* cal = app.add_subcommand("calibrate", "estimate R_s, q_s, c and sigma_d");
  cal->add_option("--dataset", dataset_dir)->required();
  cal->add_option("--out", out_path, "calibration JSON path")->required();
  cal->add_option("--config", config_path);
  add_seed(cal);

  CLI::App* trk = app.add_subcommand("track", "estimate per-slice motion");
  trk->add_option("--dataset", dataset_dir)->required();
  trk->add_option("--method", method, "none|v2v|s2v|hmt")->required();
  trk->add_option("--calibration", calibration_file);
  trk->add_option("--out", out_path, "trajectory CSV path")->required();
  trk->add_option("--config", config_path);
  add_seed(trk);

  CLI::App* rec = app.add_subcommand("reconstruct", "motion-corrected volumes");
  rec->add_option("--dataset", dataset_dir)->required();
  rec->add_option("--trajectory", trajectory_file)->required();
  rec->add_option("--calibration", calibration_file)->required();
  rec->add_option("--out", out_path, "output directory")->required();

  CLI::App* act = app.add_subcommand("activate", "permutation-test activation map");
  act->add_option("--recon", recon_dir)->required();
  act->add_option("--design", design_file)->required();
  act->add_option("--out", out_path, "output directory")->required();
  act->add_option("--config", config_path);
  add_seed(act);

  CLI::App* ev = app.add_subcommand("evaluate", "D_t / ROC-AUC / ATR metrics");
  ev->add_option("--dataset", dataset_dir)->required();
  ev->add_option("--out", out_path, "output directory")->required();
  ev->add_option("--trajectory", trajectory_file);
  ev->add_option("--calibration", calibration_file);
  ev->add_option("--activation", activation_dir);
  ev->add_option("--recon", recon_dir);
  ev->add_option("--config", config_path);
  add_seed(ev);

  CLI::App* rep = app.add_subcommand("report", "SVG plots from metric CSVs");
  rep->add_option("--out", out_path, "output directory")->required();
  rep->add_option("--truth", truth_file, "ground-truth trajectory CSV");
  rep->add_option("--track", tracks, "label=trajectory.csv (repeatable)");
  rep->add_option("--dt", dts, "label=dt_series.csv (repeatable)");
  rep->add_option("--roc", rocs, "label=roc_curve.csv (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) st::set_max_threads(threads);
    if (backend == "auto") {
      st::kernels::set_backend(st::kernels::Backend::auto_detect);
    } else if (backend == "scalar") {
      st::kernels::set_backend(st::kernels::Backend::scalar);
    } else if (backend == "avx2") {
      st::kernels::set_backend(st::kernels::Backend::avx2);
    } else if (backend == "neon") {
      st::kernels::set_backend(st::kernels::Backend::neon);
    } else {
      st::raise(st::Errc::bad_config, "unknown backend '" + backend + "'");
    }

    if (sim->parsed()) return cmd_simulate(config_path, out_path, seed);
    if (cal->parsed()) return cmd_calibrate(dataset_dir, out_path, config_path, seed);
    if (trk->parsed())
      return cmd_track(dataset_dir, method, calibration_file, out_path, config_path, seed);
    if (rec->parsed())
      return cmd_reconstruct(dataset_dir, trajectory_file, calibration_file, out_path);
    if (act->parsed())
      return cmd_activate(recon_dir, design_file, out_path, config_path, seed);
    if (ev->parsed())
      return cmd_evaluate(dataset_dir, out_path, trajectory_file, calibration_file,
                          activation_dir, recon_dir, config_path, seed);
    if (rep->parsed()) return cmd_report(out_path, truth_file, tracks, dts, rocs);
  } catch (const st::Error& e) {
    std::cerr << "slicetrack: error class=" << e.name() << " message=\"" << e.what()
              << "\"\n";
    return st::errc_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "slicetrack: error class=Internal message=\"" << e.what() << "\"\n";
    return 3;
  }
  return 1;
}
