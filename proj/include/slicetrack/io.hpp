#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slicetrack/imaging.hpp"
#include "slicetrack/phantom.hpp"
#include "slicetrack/tracking.hpp"

namespace slicetrack {

namespace fs = std::filesystem;

// ---- native volume format -------------------------------------------------
// <name>            raw little-endian float32, x-fastest
// <name>.json       {"dims", "voxel_size_mm", "origin_mm", "intensity_units"}
// write(read(x)) is bit-exact.
void write_volume(const fs::path& path, const Volume& v);
Volume read_volume(const fs::path& path);

// ---- NIfTI-1 read-only subset ----------------------------------------------
// Single-file .nii, magic "n+1\0", datatype int16 or float32, 3-D. Dims from
// dim[1..3], spacing from pixdim[1..3]; int16 scaled by scl_slope/scl_inter
// when slope is nonzero. Anything else raises UnsupportedFeature naming the
// offending field.
Volume read_nifti_subset(const fs::path& path);

// ---- atomic writes ----------------------------------------------------------
void write_text_atomic(const fs::path& path, const std::string& content);
void write_bytes_atomic(const fs::path& path, const void* data, std::size_t size);

// Removes freshly written outputs when a command fails mid-way.
class OutputGuard {
 public:
  ~OutputGuard();
  void track(const fs::path& p) { paths_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

// ---- trajectory CSV ---------------------------------------------------------
// t,m,n,alpha_deg,beta_deg,gamma_deg,dx_mm,dy_mm,dz_mm,status,objective
// The ground-truth sidecar uses status "truth".
struct TrajectoryRow {
  long t = 0;
  int m = 0;
  int n = 0;
  RigidParams params;
  std::string status = "optimized";
  double objective = 0.0;
};
void write_trajectory_csv(const fs::path& path, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(const fs::path& path);
std::vector<TrajectoryRow> trajectory_rows(const TrackResult& r);

// ---- calibration JSON -------------------------------------------------------
void write_calibration_json(const fs::path& path, const Calibration& cal);
Calibration read_calibration_json(const fs::path& path);

// ---- design CSV -------------------------------------------------------------
void write_design_csv(const fs::path& path, const std::vector<int>& labels);
std::vector<int> read_design_csv(const fs::path& path);

// ---- dataset layout ---------------------------------------------------------
// dataset.json, anatomy.vol(+.json), slices/t######.raw, manifest.csv and the
// optional ground-truth sidecars (truth_trajectory.csv, activation_mask.vol,
// design.csv, truth_calibration.json).
struct Dataset {
  Volume anat;
  std::vector<Slice> slices;  // time-ordered
  int volumes = 0;
  int slices_per_volume = 0;
  Acquisition acquisition = Acquisition::sequential;
  std::optional<std::vector<RigidParams>> truth_traj;
  std::optional<Volume> activation_mask;
  std::optional<std::vector<int>> design;
  std::optional<Calibration> truth_cal;
};

void write_dataset(const fs::path& dir, const PhantomDataset& ds, const PhantomConfig& cfg);
Dataset read_dataset(const fs::path& dir);

// ---- small CSV utilities ----------------------------------------------------
std::string format_double(double v);
std::vector<std::vector<std::string>> read_csv(const fs::path& path);

}  // namespace slicetrack
