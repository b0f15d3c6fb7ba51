#include "slicetrack/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slicetrack/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace slicetrack {

using nlohmann::json;

namespace {
constexpr double kDeg = M_PI / 180.0;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_failure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const fs::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) raise(Errc::malformed_header, "invalid JSON in " + path.string());
  return j;
}

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      raise(Errc::bad_config, "unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  write_bytes_atomic(path, content.data(), content.size());
}

void write_bytes_atomic(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_failure, "cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) raise(Errc::io_failure, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  std::error_code ec;
  for (const fs::path& p : paths_) fs::remove_all(p, ec);
}

// ---- native volume format -------------------------------------------------

void write_volume(const fs::path& path, const Volume& v) {
  v.validate();
  json hdr;
  hdr["dims"] = {v.nx, v.ny, v.nz};
  hdr["voxel_size_mm"] = {v.voxel_size[0], v.voxel_size[1], v.voxel_size[2]};
  hdr["origin_mm"] = {v.origin[0], v.origin[1], v.origin[2]};
  hdr["intensity_units"] = "arbitrary";
  fs::path sidecar = path;
  sidecar += ".json";
  write_text_atomic(sidecar, hdr.dump(2) + "\n");

  std::vector<float> raw(v.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(v.data[i]);
  write_bytes_atomic(path, raw.data(), raw.size() * sizeof(float));
}

Volume read_volume(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  const json hdr = parse_json_file(sidecar);
  expect_keys(hdr, {"dims", "voxel_size_mm", "origin_mm", "intensity_units"},
              sidecar.string());
  if (!hdr.contains("dims") || !hdr.contains("voxel_size_mm") || !hdr.contains("origin_mm"))
    raise(Errc::malformed_header, "volume sidecar missing required keys");
  const auto dims = hdr["dims"];
  const auto vs = hdr["voxel_size_mm"];
  const auto org = hdr["origin_mm"];
  if (dims.size() != 3 || vs.size() != 3 || org.size() != 3)
    raise(Errc::malformed_header, "volume sidecar fields must have 3 entries");

  Volume v;
  v.nx = dims[0].get<int>();
  v.ny = dims[1].get<int>();
  v.nz = dims[2].get<int>();
  for (int i = 0; i < 3; ++i) {
    v.voxel_size[i] = vs[i].get<double>();
    v.origin[i] = org[i].get<double>();
  }
  if (v.nx < 1 || v.ny < 1 || v.nz < 1)
    raise(Errc::malformed_header, "volume sidecar has non-positive dims");

  const std::string bytes = read_file(path);
  const std::size_t expected = v.voxel_count() * sizeof(float);
  if (bytes.size() != expected)
    raise(Errc::size_mismatch, "volume data is " + std::to_string(bytes.size() / 4) +
                                   " voxels, header expects " +
                                   std::to_string(v.voxel_count()));
  v.data.resize(v.voxel_count());
  const auto* f = reinterpret_cast<const float*>(bytes.data());
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = f[i];
  v.validate();
  return v;
}

// ---- NIfTI-1 subset ---------------------------------------------------------

namespace {

template <typename T>
T read_le(const std::string& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

}  // namespace

Volume read_nifti_subset(const fs::path& path) {
  const std::string b = read_file(path);
  if (b.size() < 348) raise(Errc::malformed_header, "file shorter than the 348-byte header");

  const auto sizeof_hdr = read_le<std::int32_t>(b, 0);
  if (sizeof_hdr != 348) {
    if (sizeof_hdr == 1543569408)  // 348 byte-swapped
      raise(Errc::unsupported_feature, "big-endian NIfTI file");
    raise(Errc::malformed_header, "sizeof_hdr != 348");
  }

  char magic[4];
  std::memcpy(magic, b.data() + 344, 4);
  if (std::memcmp(magic, "n+1\0", 4) != 0) {
    if (std::memcmp(magic, "ni1\0", 4) == 0)
      raise(Errc::unsupported_feature, "two-file NIfTI (magic ni1)");
    raise(Errc::bad_magic, "magic is not n+1");
  }

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(b, 40 + 2 * i);
  if (dim[0] < 1 || dim[0] > 7) raise(Errc::malformed_header, "dim[0] out of range");
  for (int i = 4; i <= dim[0]; ++i)
    if (dim[i] > 1) raise(Errc::unsupported_feature, "dim[" + std::to_string(i) + "] > 1");

  const auto datatype = read_le<std::int16_t>(b, 70);
  if (datatype != 4 && datatype != 16)
    raise(Errc::unsupported_feature, "datatype=" + std::to_string(datatype));

  Volume v;
  v.nx = dim[0] >= 1 ? dim[1] : 1;
  v.ny = dim[0] >= 2 ? dim[2] : 1;
  v.nz = dim[0] >= 3 ? dim[3] : 1;
  if (v.nx < 1 || v.ny < 1 || v.nz < 1) raise(Errc::malformed_header, "non-positive dims");

  for (int i = 0; i < 3; ++i) {
    const float pd = i < dim[0] ? read_le<float>(b, 76 + 4 * (i + 1)) : 1.0f;
    if (!(pd > 0.0f)) raise(Errc::malformed_header, "pixdim[" + std::to_string(i + 1) +
                                                        "] must be positive");
    v.voxel_size[i] = pd;
  }

  const float vox_offset = read_le<float>(b, 108);
  if (vox_offset < 348.0f || std::floor(vox_offset) != vox_offset)
    raise(Errc::malformed_header, "vox_offset must be an integer >= 348");
  const auto off = static_cast<std::size_t>(vox_offset);

  const float slope = read_le<float>(b, 112);
  const float inter = read_le<float>(b, 116);

  const std::size_t n = v.voxel_count();
  const std::size_t elem = datatype == 4 ? 2 : 4;
  if (b.size() < off + n * elem)
    raise(Errc::size_mismatch, "data section holds " + std::to_string((b.size() - off) / elem) +
                                   " voxels, header expects " + std::to_string(n));

  v.data.resize(n);
  if (datatype == 16) {
    for (std::size_t i = 0; i < n; ++i) v.data[i] = read_le<float>(b, off + 4 * i);
  } else {
    const bool scaled = slope != 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      const double raw = read_le<std::int16_t>(b, off + 2 * i);
      v.data[i] = scaled ? raw * slope + inter : raw;
    }
  }
  v.validate();
  return v;
}

// ---- trajectory CSV ---------------------------------------------------------

namespace {
const char* kTrajectoryHeader =
    "t,m,n,alpha_deg,beta_deg,gamma_deg,dx_mm,dy_mm,dz_mm,status,objective";
}

void write_trajectory_csv(const fs::path& path, const std::vector<TrajectoryRow>& rows) {
  std::string out(kTrajectoryHeader);
  out += "\n";
  for (const TrajectoryRow& r : rows) {
    out += std::to_string(r.t) + "," + std::to_string(r.m) + "," + std::to_string(r.n) + ",";
    out += format_double(r.params.alpha / kDeg) + "," + format_double(r.params.beta / kDeg) +
           "," + format_double(r.params.gamma / kDeg) + ",";
    out += format_double(r.params.dx) + "," + format_double(r.params.dy) + "," +
           format_double(r.params.dz) + ",";
    out += r.status + "," + format_double(r.objective) + "\n";
  }
  write_text_atomic(path, out);
}

std::vector<TrajectoryRow> read_trajectory_csv(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) raise(Errc::malformed_header, "empty trajectory csv");
  std::string hdr;
  for (std::size_t i = 0; i < rows[0].size(); ++i)
    hdr += (i ? "," : "") + rows[0][i];
  if (hdr != kTrajectoryHeader)
    raise(Errc::malformed_header, "unexpected trajectory csv header: " + hdr);

  std::vector<TrajectoryRow> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 11)
      raise(Errc::malformed_header, "trajectory row needs 11 fields, got " +
                                        std::to_string(f.size()));
    TrajectoryRow r;
    r.t = std::stol(f[0]);
    r.m = std::stoi(f[1]);
    r.n = std::stoi(f[2]);
    r.params.alpha = std::stod(f[3]) * kDeg;
    r.params.beta = std::stod(f[4]) * kDeg;
    r.params.gamma = std::stod(f[5]) * kDeg;
    r.params.dx = std::stod(f[6]);
    r.params.dy = std::stod(f[7]);
    r.params.dz = std::stod(f[8]);
    r.status = f[9];
    r.objective = std::stod(f[10]);
    out.push_back(r);
  }
  return out;
}

std::vector<TrajectoryRow> trajectory_rows(const TrackResult& tr) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(tr.entries.size());
  for (const TrackEntry& e : tr.entries) {
    TrajectoryRow r;
    r.t = e.t;
    r.m = e.volume_index;
    r.n = e.slice_index;
    r.params = e.theta;
    r.status = track_status_name(e.status);
    r.objective = e.objective;
    rows.push_back(r);
  }
  return rows;
}

// ---- calibration JSON -------------------------------------------------------

void write_calibration_json(const fs::path& path, const Calibration& cal) {
  json j;
  j["schema_version"] = 1;
  json rs = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rs.push_back(cal.r_s(r, c));
  j["r_s"] = rs;
  j["q_s_mm"] = {cal.q_s[0], cal.q_s[1], cal.q_s[2]};
  j["c_mm"] = {cal.c[0], cal.c[1], cal.c[2]};
  json sd = json::array();
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) sd.push_back(cal.sigma_d(r, c));
  j["sigma_d"] = sd;
  j["center_degenerate"] = cal.center_degenerate;
  write_text_atomic(path, j.dump(2) + "\n");
}

Calibration read_calibration_json(const fs::path& path) {
  const json j = parse_json_file(path);
  expect_keys(j, {"schema_version", "r_s", "q_s_mm", "c_mm", "sigma_d", "center_degenerate"},
              path.string());
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
    raise(Errc::bad_config, "unsupported calibration schema version");
  Calibration cal;
  const auto rs = j.at("r_s");
  const auto sd = j.at("sigma_d");
  if (rs.size() != 9 || sd.size() != 36)
    raise(Errc::malformed_header, "calibration matrices have wrong size");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cal.r_s(r, c) = rs[3 * r + c].get<double>();
  for (int i = 0; i < 3; ++i) {
    cal.q_s[i] = j.at("q_s_mm")[i].get<double>();
    cal.c[i] = j.at("c_mm")[i].get<double>();
  }
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) cal.sigma_d(r, c) = sd[6 * r + c].get<double>();
  cal.center_degenerate = j.value("center_degenerate", false);
  cal.validate();
  return cal;
}

// ---- design CSV -------------------------------------------------------------

void write_design_csv(const fs::path& path, const std::vector<int>& labels) {
  std::string out = "m,label\n";
  for (std::size_t m = 0; m < labels.size(); ++m)
    out += std::to_string(m + 1) + "," + (labels[m] ? "stim" : "control") + "\n";
  write_text_atomic(path, out);
}

std::vector<int> read_design_csv(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"m", "label"})
    raise(Errc::malformed_header, "unexpected design csv header");
  std::vector<int> labels(rows.size() - 1, 0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) raise(Errc::malformed_header, "design row needs 2 fields");
    const int m = std::stoi(rows[i][0]);
    if (m < 1 || m > static_cast<int>(labels.size()))
      raise(Errc::malformed_header, "design volume index out of range");
    if (rows[i][1] == "stim")
      labels[m - 1] = 1;
    else if (rows[i][1] == "control")
      labels[m - 1] = 0;
    else
      raise(Errc::malformed_header, "design label must be stim or control");
  }
  return labels;
}

// ---- dataset layout ---------------------------------------------------------

namespace {

const char* kManifestHeader =
    "t,m,n,file,nu,nv,pu_mm,pv_mm,ox_mm,oy_mm,oz_mm,ux,uy,uz,vx,vy,vz";

std::string slice_file_name(long t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%06ld.raw", t);
  return buf;
}

}  // namespace

void write_dataset(const fs::path& dir, const PhantomDataset& ds, const PhantomConfig& cfg) {
  fs::create_directories(dir / "slices");

  json meta;
  meta["schema_version"] = 1;
  meta["volumes"] = cfg.volumes;
  meta["slices_per_volume"] = cfg.slices_per_volume();
  meta["acquisition"] = acquisition_name(cfg.acquisition);
  meta["seed"] = cfg.seed;
  write_text_atomic(dir / "dataset.json", meta.dump(2) + "\n");

  write_volume(dir / "anatomy.vol", ds.anat);
  write_volume(dir / "activation_mask.vol", ds.activation_mask);
  write_calibration_json(dir / "truth_calibration.json", ds.true_cal);
  write_design_csv(dir / "design.csv", ds.design);

  std::string manifest(kManifestHeader);
  manifest += "\n";
  for (const Slice& s : ds.slices) {
    const SliceGeometry& g = s.geometry;
    manifest += std::to_string(s.time_index) + "," + std::to_string(s.volume_index) + "," +
                std::to_string(g.slice_index) + "," + slice_file_name(s.time_index) + "," +
                std::to_string(g.nu) + "," + std::to_string(g.nv) + "," +
                format_double(g.pixel_spacing_u) + "," + format_double(g.pixel_spacing_v);
    for (int i = 0; i < 3; ++i) manifest += "," + format_double(g.plane_origin[i]);
    for (int i = 0; i < 3; ++i) manifest += "," + format_double(g.axis_u[i]);
    for (int i = 0; i < 3; ++i) manifest += "," + format_double(g.axis_v[i]);
    manifest += "\n";

    std::vector<float> raw(s.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(s.data[i]);
    write_bytes_atomic(dir / "slices" / slice_file_name(s.time_index), raw.data(),
                       raw.size() * sizeof(float));
  }
  write_text_atomic(dir / "manifest.csv", manifest);

  std::vector<TrajectoryRow> truth;
  truth.reserve(ds.slices.size());
  for (std::size_t i = 0; i < ds.slices.size(); ++i) {
    TrajectoryRow r;
    r.t = ds.slices[i].time_index;
    r.m = ds.slices[i].volume_index;
    r.n = ds.slices[i].geometry.slice_index;
    r.params = ds.true_traj[i];
    r.status = "truth";
    r.objective = 0.0;
    truth.push_back(r);
  }
  write_trajectory_csv(dir / "truth_trajectory.csv", truth);
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  const json meta = parse_json_file(dir / "dataset.json");
  expect_keys(meta, {"schema_version", "volumes", "slices_per_volume", "acquisition", "seed"},
              "dataset.json");
  if (meta.at("schema_version").get<int>() != 1)
    raise(Errc::bad_config, "unsupported dataset schema version");
  ds.volumes = meta.at("volumes").get<int>();
  ds.slices_per_volume = meta.at("slices_per_volume").get<int>();
  ds.acquisition = acquisition_from_name(meta.at("acquisition").get<std::string>());

  ds.anat = read_volume(dir / "anatomy.vol");

  const auto rows = read_csv(dir / "manifest.csv");
  if (rows.empty()) raise(Errc::malformed_header, "empty manifest");
  {
    std::string hdr;
    for (std::size_t i = 0; i < rows[0].size(); ++i) hdr += (i ? "," : "") + rows[0][i];
    if (hdr != kManifestHeader)
      raise(Errc::malformed_header, "unexpected manifest header: " + hdr);
  }

  std::size_t file_count = 0;
  for (const auto& e : fs::directory_iterator(dir / "slices"))
    if (e.is_regular_file()) ++file_count;
  if (file_count != rows.size() - 1)
    raise(Errc::size_mismatch, "manifest lists " + std::to_string(rows.size() - 1) +
                                   " slices but " + std::to_string(file_count) +
                                   " slice files exist");

  ds.slices.resize(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 17) raise(Errc::malformed_header, "manifest row needs 17 fields");
    Slice s;
    s.time_index = std::stol(f[0]);
    s.volume_index = std::stoi(f[1]);
    SliceGeometry& g = s.geometry;
    g.slice_index = std::stoi(f[2]);
    g.nu = std::stoi(f[4]);
    g.nv = std::stoi(f[5]);
    g.pixel_spacing_u = std::stod(f[6]);
    g.pixel_spacing_v = std::stod(f[7]);
    for (int k = 0; k < 3; ++k) g.plane_origin[k] = std::stod(f[8 + k]);
    for (int k = 0; k < 3; ++k) g.axis_u[k] = std::stod(f[11 + k]);
    for (int k = 0; k < 3; ++k) g.axis_v[k] = std::stod(f[14 + k]);
    g.validate();

    const fs::path sf = dir / "slices" / f[3];
    if (!fs::exists(sf)) raise(Errc::io_failure, "missing slice file " + sf.string());
    const std::string bytes = read_file(sf);
    if (bytes.size() != g.pixel_count() * sizeof(float))
      raise(Errc::size_mismatch, "slice file " + f[3] + " holds " +
                                     std::to_string(bytes.size() / 4) + " pixels, expected " +
                                     std::to_string(g.pixel_count()));
    s.data.resize(g.pixel_count());
    const auto* fl = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t k = 0; k < s.data.size(); ++k) s.data[k] = fl[k];

    if (s.time_index < 1 || s.time_index > static_cast<long>(ds.slices.size()))
      raise(Errc::malformed_header, "slice time index out of range");
    ds.slices[s.time_index - 1] = std::move(s);
  }
  for (long t = 1; t <= static_cast<long>(ds.slices.size()); ++t)
    if (ds.slices[t - 1].time_index != t)
      raise(Errc::malformed_header, "manifest is missing time index " + std::to_string(t));

  if (fs::exists(dir / "truth_trajectory.csv")) {
    const auto truth = read_trajectory_csv(dir / "truth_trajectory.csv");
    std::vector<RigidParams> tj(truth.size());
    for (const TrajectoryRow& r : truth) {
      if (r.t < 1 || r.t > static_cast<long>(tj.size()))
        raise(Errc::malformed_header, "truth trajectory t out of range");
      tj[r.t - 1] = r.params;
    }
    ds.truth_traj = std::move(tj);
  }
  if (fs::exists(dir / "activation_mask.vol"))
    ds.activation_mask = read_volume(dir / "activation_mask.vol");
  if (fs::exists(dir / "design.csv")) ds.design = read_design_csv(dir / "design.csv");
  if (fs::exists(dir / "truth_calibration.json"))
    ds.truth_cal = read_calibration_json(dir / "truth_calibration.json");
  return ds;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace slicetrack
