#include "slicetrack/similarity.hpp"

#include <cmath>

#include "slicetrack/errors.hpp"
#include "slicetrack/kernels.hpp"

namespace slicetrack {

namespace {

constexpr long kMinValidPairs = 32;

double mi_from_counts(const double* counts, int bins, double total) {
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  const double inv = 1.0 / total;
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      const double c = counts[static_cast<std::size_t>(i) * bins + j];
      pa[i] += c;
      pb[j] += c;
    }
  double mi = 0.0;
  for (int i = 0; i < bins; ++i) {
    if (pa[i] == 0.0) continue;
    for (int j = 0; j < bins; ++j) {
      const double c = counts[static_cast<std::size_t>(i) * bins + j];
      if (c == 0.0) continue;
      const double p = c * inv;
      mi += p * std::log(p / (pa[i] * inv * (pb[j] * inv)));
    }
  }
  return mi < 0.0 ? 0.0 : mi;  // clip rounding residue
}

kernels::GridView grid_view(const Volume& v) {
  return kernels::GridView{v.data.data(), v.nx,           v.ny,           v.nz,
                           v.origin[0],   v.origin[1],    v.origin[2],    v.voxel_size[0],
                           v.voxel_size[1], v.voxel_size[2]};
}

}  // namespace

JointHistogram joint_histogram(std::span<const double> a, std::span<const double> b,
                               std::span<const std::uint8_t> valid, int bins) {
  if (a.size() != b.size() || a.size() != valid.size())
    raise(Errc::shape_mismatch, "histogram inputs differ in length");
  if (bins < 2) raise(Errc::bad_config, "need at least 2 bins");

  const kernels::PairRange r = kernels::pair_range(a.data(), b.data(), valid.data(), a.size());
  if (static_cast<long>(r.count) < kMinValidPairs)
    raise(Errc::empty_overlap, "only " + std::to_string(r.count) + " valid pairs (need " +
                                   std::to_string(kMinValidPairs) + ")");

  JointHistogram h;
  h.bins = bins;
  h.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
  h.min_a = r.min_a;
  h.max_a = r.max_a;
  h.min_b = r.min_b;
  h.max_b = r.max_b;
  h.degenerate_a = !(r.max_a > r.min_a);
  h.degenerate_b = !(r.max_b > r.min_b);
  kernels::joint_hist_accumulate(a.data(), b.data(), valid.data(), a.size(), bins, r.min_a,
                                 r.max_a, r.min_b, r.max_b, h.counts.data());
  h.total = static_cast<double>(r.count);
  return h;
}

JointHistogram joint_histogram(std::span<const double> a, std::span<const double> b,
                               int bins) {
  std::vector<std::uint8_t> all(a.size(), 1);
  return joint_histogram(a, b, std::span<const std::uint8_t>(all), bins);
}

double mutual_information(const JointHistogram& h) {
  if (!(h.total > 0.0)) raise(Errc::empty_overlap, "histogram has no mass");
  return mi_from_counts(h.counts.data(), h.bins, h.total);
}

PixelCenterCache::PixelCenterCache(const std::vector<Slice>& slices) {
  for (const Slice& s : slices) add(&s);
}

void PixelCenterCache::add(const Slice* s) {
  if (centers_.count(s)) return;
  const SliceGeometry& g = s->geometry;
  PointsSoA p;
  const std::size_t n = g.pixel_count();
  p.x.resize(n);
  p.y.resize(n);
  p.z.resize(n);
  std::size_t k = 0;
  for (int iv = 0; iv < g.nv; ++iv)
    for (int iu = 0; iu < g.nu; ++iu, ++k) {
      const Vec3 c = g.pixel_center(iu, iv);
      p.x[k] = c[0];
      p.y[k] = c[1];
      p.z[k] = c[2];
    }
  centers_.emplace(s, std::move(p));
}

const PixelCenterCache::PointsSoA& PixelCenterCache::get(const Slice* s) const {
  auto it = centers_.find(s);
  if (it == centers_.end()) raise(Errc::bad_config, "slice missing from pixel-center cache");
  return it->second;
}

StackEvaluator::StackEvaluator(const Volume& v_anat, const PixelCenterCache& cache, int bins)
    : anat_(&v_anat), cache_(&cache), bins_(bins) {
  hist_.resize(static_cast<std::size_t>(bins) * bins);
}

std::optional<double> StackEvaluator::try_evaluate(const SliceStack& stack,
                                                   const RigidParams& p,
                                                   const Calibration& cal) {
  std::size_t total_n = 0;
  for (const Slice* s : stack.slices) total_n += s->geometry.pixel_count();
  if (sampled_.size() < total_n) {
    sampled_.resize(total_n);
    valid_.resize(total_n);
  }

  const AffineChain ch = chain_affine(p, cal);
  double a[9], b[3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a[r * 3 + c] = ch.a(r, c);
    b[r] = ch.b[r];
  }

  const kernels::GridView gv = grid_view(*anat_);
  std::size_t off = 0;
  for (const Slice* s : stack.slices) {
    const auto& pts = cache_->get(s);
    const std::size_t n = pts.x.size();
    kernels::resample_points(gv, a, b, pts.x.data(), pts.y.data(), pts.z.data(), n,
                             sampled_.data() + off, valid_.data() + off);
    off += n;
  }

  // Pooled range over all (observed, extracted) valid pairs.
  double mn_a = HUGE_VAL, mx_a = -HUGE_VAL, mn_b = HUGE_VAL, mx_b = -HUGE_VAL;
  std::size_t count = 0;
  off = 0;
  for (const Slice* s : stack.slices) {
    const std::size_t n = s->geometry.pixel_count();
    const kernels::PairRange r =
        kernels::pair_range(s->data.data(), sampled_.data() + off, valid_.data() + off, n);
    if (r.count) {
      count += r.count;
      mn_a = std::min(mn_a, r.min_a);
      mx_a = std::max(mx_a, r.max_a);
      mn_b = std::min(mn_b, r.min_b);
      mx_b = std::max(mx_b, r.max_b);
    }
    off += n;
  }
  if (static_cast<long>(count) < kMinValidPairs) return std::nullopt;

  std::fill(hist_.begin(), hist_.end(), 0.0);
  off = 0;
  for (const Slice* s : stack.slices) {
    const std::size_t n = s->geometry.pixel_count();
    kernels::joint_hist_accumulate(s->data.data(), sampled_.data() + off, valid_.data() + off,
                                   n, bins_, mn_a, mx_a, mn_b, mx_b, hist_.data());
    off += n;
  }
  return mi_from_counts(hist_.data(), bins_, static_cast<double>(count));
}

std::optional<double> try_stack_similarity(const SliceStack& stack, const RigidParams& p,
                                           const Volume& v_anat, const Calibration& cal,
                                           int bins) {
  PixelCenterCache cache;
  for (const Slice* s : stack.slices) cache.add(s);
  StackEvaluator ev(v_anat, cache, bins);
  return ev.try_evaluate(stack, p, cal);
}

double stack_similarity(const SliceStack& stack, const RigidParams& p, const Volume& v_anat,
                        const Calibration& cal, int bins) {
  auto mi = try_stack_similarity(stack, p, v_anat, cal, bins);
  if (!mi) raise(Errc::empty_overlap, "stack similarity has insufficient overlap");
  return *mi;
}

}  // namespace slicetrack
