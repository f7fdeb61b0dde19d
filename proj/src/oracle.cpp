#include "semisam/oracle.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>

#include "semisam/geometry.hpp"
#include "semisam/patch.hpp"

namespace semisam {

PromptSet extract_prompts(const Volume& foreground_prob, int k_positive, Rng& rng) {
  if (k_positive < 1) throw ContractViolation("extract_prompts: k_positive must be >= 1");
  const BinaryMask component = largest_component(binarize(foreground_prob, 0.5f));
  PromptSet out;
  if (component.empty_foreground()) return out;

  const Dims& s = component.shape;
  const auto depth = squared_interior_distance(component);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (component.data[i] && depth[i] > best_d) {
      best_d = depth[i];
      best = i;
    }
  }
  auto to_index = [&](std::size_t flat) {
    const int x = static_cast<int>(flat % s.w);
    const int y = static_cast<int>((flat / s.w) % s.h);
    const int z = static_cast<int>(flat / (static_cast<std::size_t>(s.w) * s.h));
    return Index3{z, y, x};
  };
  out.points.push_back({to_index(best), Polarity::positive});
  if (k_positive == 1) return out;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (component.data[i] && depth[i] > 1.0 && i != best) candidates.push_back(i);
  }
  if (candidates.empty()) {
    for (std::size_t i = 0; i < depth.size(); ++i) {
      if (component.data[i] && i != best) candidates.push_back(i);
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  auto far_enough = [&](const Index3& p) {
    for (const auto& q : out.points) {
      const int dz = p.z - q.at.z, dy = p.y - q.at.y, dx = p.x - q.at.x;
      if (dz * dz + dy * dy + dx * dx < kMinPromptSeparation * kMinPromptSeparation) return false;
    }
    return true;
  };
  std::vector<std::size_t> rejected;
  for (std::size_t flat : candidates) {
    if (static_cast<int>(out.points.size()) >= k_positive) break;
    const Index3 p = to_index(flat);
    if (far_enough(p)) {
      out.points.push_back({p, Polarity::positive});
    } else {
      rejected.push_back(flat);
    }
  }
  // Separation infeasible: fill the remainder without it.
  for (std::size_t flat : rejected) {
    if (static_cast<int>(out.points.size()) >= k_positive) break;
    out.points.push_back({to_index(flat), Polarity::positive});
  }
  return out;
}

PseudoLabel query_oracle(OracleBackend& backend, const Volume& patch, const PromptSet& prompts,
                         const QueryContext& ctx) {
  if (prompts.empty()) throw ContractViolation("query_oracle: prompt set is empty");
  for (const auto& p : prompts.points) {
    if (!patch.shape.contains(p.at.z, p.at.y, p.at.x)) throw ContractViolation("query_oracle: prompt outside patch");
  }
  PseudoLabel out;
  out.provenance.backend = backend.kind();
  out.provenance.prompts = prompts;
  const auto start = std::chrono::steady_clock::now();
  try {
    out.mask = backend.segment(patch, prompts, ctx, out.provenance.model_name);
    if (!(out.mask.shape == patch.shape)) {
      throw ShapeMismatch("oracle returned shape " + to_string(out.mask.shape) + " for patch " +
                          to_string(patch.shape));
    }
    for (auto& v : out.mask.data) v = v ? 1 : 0;
  } catch (const std::exception& e) {
    spdlog::warn("oracle query for case '{}' skipped: {}", ctx.case_id, e.what());
    out.mask = BinaryMask(patch.shape, 0);
    out.provenance.skipped = true;
    out.provenance.note = e.what();
  }
  out.provenance.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

BinaryMask synth_oracle(const BinaryMask& ground_truth, const Degradation& degradation, Rng& rng) {
  if (degradation.flip_rate < 0.0 || degradation.flip_rate > 1.0) {
    throw ContractViolation("synth_oracle: flip_rate outside [0, 1]");
  }
  BinaryMask out = morph_ball(ground_truth, degradation.radius);
  if (degradation.flip_rate == 0.0) return out;
  const BinaryMask edge = interface_voxels(out);
  std::bernoulli_distribution flip(degradation.flip_rate);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (edge.data[i] && flip(rng)) out.data[i] ^= 1;
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string query_key(const QueryContext& ctx, const PromptSet& prompts) {
  std::string key = ctx.case_id + "@" + std::to_string(ctx.origin.z) + "," + std::to_string(ctx.origin.y) + "," +
                    std::to_string(ctx.origin.x);
  for (const auto& p : prompts.points) {
    key += "|" + std::to_string(p.at.z) + "," + std::to_string(p.at.y) + "," + std::to_string(p.at.x) +
           (p.polarity == Polarity::positive ? "+" : "-");
  }
  return key;
}

BinaryMask SyntheticOracle::segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                                    std::string& model_name) {
  const BinaryMask* truth = lookup_ ? lookup_(ctx.case_id) : nullptr;
  if (!truth) throw Error("synthetic oracle has no ground truth for case '" + ctx.case_id + "'");
  model_name = "synthetic(r=" + std::to_string(degradation_.radius) + ",p=" + std::to_string(degradation_.flip_rate) +
               ")";
  Rng rng(mix64(seed_ ^ fnv1a(query_key(ctx, prompts))));
  return synth_oracle(crop(*truth, ctx.origin, patch.shape), degradation_, rng);
}

BinaryMask CachingOracle::segment(const Volume& patch, const PromptSet& prompts, const QueryContext& ctx,
                                  std::string& model_name) {
  const std::string key = query_key(ctx, prompts);
  if (auto it = index_.find(key); it != index_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    ++hits_;
    model_name = it->second->model_name;
    return it->second->mask;
  }
  BinaryMask mask = inner_->segment(patch, prompts, ctx, model_name);
  if (capacity_ > 0) {
    order_.push_front(Entry{key, mask, model_name});
    index_[key] = order_.begin();
    if (index_.size() > capacity_) {
      index_.erase(order_.back().key);
      order_.pop_back();
    }
  }
  return mask;
}

}  // namespace semisam
