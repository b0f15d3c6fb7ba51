#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "slicetrack/imaging.hpp"

namespace slicetrack {

// Joint intensity histogram over valid (a, b) pairs; equal-width bins over
// each image's own [min, max]. Counts are raw; probabilities on read-out.
struct JointHistogram {
  int bins = 0;
  std::vector<double> counts;  // bins*bins, row = a-bin
  double total = 0.0;
  double min_a = 0.0, max_a = 0.0, min_b = 0.0, max_b = 0.0;
  bool degenerate_a = false;  // constant image; single occupied bin row
  bool degenerate_b = false;

  double count(int ia, int ib) const { return counts[static_cast<std::size_t>(ia) * bins + ib]; }
  double probability(int ia, int ib) const { return count(ia, ib) / total; }
};

// Throws EmptyOverlap when fewer than 32 valid pairs remain.
JointHistogram joint_histogram(std::span<const double> a, std::span<const double> b,
                               std::span<const std::uint8_t> valid, int bins);
JointHistogram joint_histogram(std::span<const double> a, std::span<const double> b,
                               int bins);

// I(X;Y) in nats, with 0 log 0 := 0. Non-negative.
double mutual_information(const JointHistogram& h);

// Precomputed scanner-frame pixel centers for a fixed slice set, shared
// read-only across evaluator threads.
class PixelCenterCache {
 public:
  PixelCenterCache() = default;
  explicit PixelCenterCache(const std::vector<Slice>& slices);

  struct PointsSoA {
    std::vector<double> x, y, z;
  };

  void add(const Slice* s);
  const PointsSoA& get(const Slice* s) const;

 private:
  std::unordered_map<const Slice*, PointsSoA> centers_;
};

// Stack-similarity evaluator with reusable scratch buffers. One instance per
// thread; the cache and volume are shared and read-only.
class StackEvaluator {
 public:
  StackEvaluator(const Volume& v_anat, const PixelCenterCache& cache, int bins);

  // Pooled MI of (observed, extracted) pairs over the whole stack under a
  // single candidate p. nullopt = EmptyOverlap (< 32 valid pairs).
  std::optional<double> try_evaluate(const SliceStack& stack, const RigidParams& p,
                                     const Calibration& cal);

 private:
  const Volume* anat_;
  const PixelCenterCache* cache_;
  int bins_;
  std::vector<double> sampled_;
  std::vector<std::uint8_t> valid_;
  std::vector<double> hist_;
};

// One-shot forms of the spec operation (build cache and buffers per call).
double stack_similarity(const SliceStack& stack, const RigidParams& p, const Volume& v_anat,
                        const Calibration& cal, int bins);
std::optional<double> try_stack_similarity(const SliceStack& stack, const RigidParams& p,
                                           const Volume& v_anat, const Calibration& cal,
                                           int bins);

}  // namespace slicetrack
