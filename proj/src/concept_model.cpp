#include "suplab/concept_model.hpp"

#include "suplab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace suplab {

SparseVector::SparseVector(std::size_t dim, std::vector<SparseEntry> entries)
    : dim_(dim), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].index >= dim_) throw DataError("sparse vector index out of range");
    if (i > 0 && entries_[i].index == entries_[i - 1].index) throw DataError("duplicate sparse index");
  }
}

SparseVector SparseVector::from_dense(const Vector& dense, double tolerance) {
  SparseVector out(static_cast<std::size_t>(dense.size()));
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if (std::abs(dense[i]) > tolerance) out.entries_.push_back({static_cast<std::size_t>(i), dense[i]});
  }
  return out;
}

Vector SparseVector::to_dense() const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& e : entries_) out[static_cast<Eigen::Index>(e.index)] = e.value;
  return out;
}

double SparseVector::dot(const Vector& dense) const {
  if (static_cast<std::size_t>(dense.size()) != dim_) throw DimensionError("sparse dot: dimension mismatch");
  double acc = 0.0;
  for (const auto& e : entries_) acc += e.value * dense[static_cast<Eigen::Index>(e.index)];
  return acc;
}

double SparseVector::norm2() const {
  double sq = 0.0;
  for (const auto& e : entries_) sq += e.value * e.value;
  return std::sqrt(sq);
}

double SparseVector::norm_inf() const {
  double m = 0.0;
  for (const auto& e : entries_) m = std::max(m, std::abs(e.value));
  return m;
}

bool SparseVector::contains(std::size_t index) const {
  return std::binary_search(entries_.begin(), entries_.end(), SparseEntry{index, 0.0},
                            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
}

std::string to_string(SupportLaw law) {
  switch (law) {
    case SupportLaw::uniform: return "uniform";
    case SupportLaw::clustered: return "clustered";
    case SupportLaw::one_hot_cells: return "one-hot-cells";
  }
  return "unknown";
}

SupportLaw parse_support_law(const std::string& text) {
  if (text == "uniform" || text == "uniform-support") return SupportLaw::uniform;
  if (text == "clustered" || text == "clustered-support") return SupportLaw::clustered;
  if (text == "one-hot-cells" || text == "cells") return SupportLaw::one_hot_cells;
  throw ConfigError("unknown support law '" + text + "'");
}

double ConceptWorld::concept_l2_bound() const {
  return config.value_high * std::sqrt(static_cast<double>(config.sparsity));
}

std::size_t ConceptWorld::pool_count() const {
  if (config.law == SupportLaw::one_hot_cells) return config.concept_dim;
  const std::size_t stride = 2 * config.sparsity;
  return std::max<std::size_t>(1, (config.concept_dim + stride - 1) / stride);
}

std::vector<std::size_t> ConceptWorld::pool(std::size_t id) const {
  const std::size_t d1 = config.concept_dim;
  if (config.law == SupportLaw::one_hot_cells) return {id % d1};
  const std::size_t size = std::min(4 * config.sparsity, d1);
  const std::size_t first = (id % pool_count()) * 2 * config.sparsity;
  std::vector<std::size_t> out(size);
  for (std::size_t t = 0; t < size; ++t) out[t] = (first + t) % d1;
  std::sort(out.begin(), out.end());
  return out;
}

Matrix make_superposition_map(std::size_t concept_dim, std::size_t feature_dim, Rng& rng) {
  if (feature_dim < 1 || concept_dim < 1) throw ConfigError("superposition map needs positive dimensions");
  Matrix p(static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(concept_dim));
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index r = 0; r < p.rows(); ++r) p(r, c) = rng.normal();
      norm = p.col(c).norm();
    }
    p.col(c) /= norm;
  }
  return p;
}

ConceptWorld make_world(const WorldConfig& config) {
  if (config.concept_dim < 1 || config.feature_dim < 1) throw ConfigError("world dimensions must be positive");
  if (config.sparsity < 1 || config.sparsity > config.concept_dim) {
    throw ConfigError("world sparsity must lie in [1, d1]");
  }
  if (config.noise_variance < 0.0) throw ConfigError("noise variance must be non-negative");
  if (!(config.value_low >= 0.0 && config.value_low <= config.value_high)) {
    throw ConfigError("concept value range must satisfy 0 <= low <= high");
  }
  ConceptWorld world;
  world.config = config;
  Rng weight_rng(config.seed, 1);
  world.w_star.resize(static_cast<Eigen::Index>(config.concept_dim));
  for (Eigen::Index i = 0; i < world.w_star.size(); ++i) world.w_star[i] = weight_rng.normal();
  Rng map_rng(config.seed, 2);
  world.projection = make_superposition_map(config.concept_dim, config.feature_dim, map_rng);
  return world;
}

double ground_truth(const ConceptWorld& world, const SparseVector& phi) {
  return phi.dot(world.w_star);
}

Sample sample_point(const ConceptWorld& world, Rng& rng, std::optional<std::size_t> pool) {
  const WorldConfig& cfg = world.config;
  const std::size_t d1 = cfg.concept_dim;
  std::vector<SparseEntry> entries;
  Sample out;

  if (cfg.law == SupportLaw::one_hot_cells) {
    const std::size_t cell = pool ? *pool % d1 : rng.below(d1);
    entries.push_back({cell, 1.0});
    out.cell = cell;
  } else {
    std::vector<std::size_t> support;
    if (cfg.law == SupportLaw::uniform && !pool) {
      support = rng.sample_without_replacement(d1, cfg.sparsity);
    } else {
      const std::size_t id = pool ? *pool % world.pool_count() : rng.below(world.pool_count());
      const std::vector<std::size_t> members = world.pool(id);
      for (std::size_t pick : rng.sample_without_replacement(members.size(), cfg.sparsity)) {
        support.push_back(members[pick]);
      }
      out.cell = id;
    }
    for (std::size_t index : support) {
      double magnitude = rng.uniform(cfg.value_low, cfg.value_high);
      magnitude = std::clamp(magnitude, 0.0, world.concept_linf_bound());
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      entries.push_back({index, sign * magnitude});
    }
  }

  out.phi = SparseVector(d1, std::move(entries));
  out.feature = Vector::Zero(world.projection.rows());
  for (const auto& e : out.phi.entries()) {
    out.feature += e.value * world.projection.col(static_cast<Eigen::Index>(e.index));
  }
  out.label = ground_truth(world, out.phi);
  if (cfg.noise_variance > 0.0) out.label += std::sqrt(cfg.noise_variance) * rng.normal();
  return out;
}

std::vector<Sample> sample_dataset(const ConceptWorld& world, std::size_t n, Rng& rng) {
  if (n < 1) throw ConfigError("sample_dataset needs n >= 1");
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_point(world, rng));
  return out;
}

Matrix feature_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(samples.size()), samples.front().feature.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = samples[i].feature.transpose();
  return out;
}

Matrix concept_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return Matrix(0, 0);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(samples.size()),
                            static_cast<Eigen::Index>(samples.front().phi.dim()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& e : samples[i].phi.entries()) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.index)) = e.value;
    }
  }
  return out;
}

Vector label_vector(std::span<const Sample> samples) {
  Vector out(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) out[static_cast<Eigen::Index>(i)] = samples[i].label;
  return out;
}

Sample NonLearnableInstance::cell_sample(std::size_t cell) const {
  if (cell >= concept_dim()) throw ConfigError("cell index out of range");
  Sample s;
  s.phi = SparseVector(concept_dim(), {{cell, 1.0}});
  s.feature = projection.col(static_cast<Eigen::Index>(cell));
  s.label = 1.0;
  s.cell = cell;
  return s;
}

std::vector<Sample> NonLearnableInstance::samples() const {
  std::vector<Sample> out;
  out.reserve(concept_dim());
  for (std::size_t m = 0; m < concept_dim(); ++m) out.push_back(cell_sample(m));
  return out;
}

Matrix NonLearnableInstance::local_projection(std::size_t cell) const {
  if (cell >= concept_dim()) throw ConfigError("cell index out of range");
  Matrix p = Matrix::Zero(projection.rows(), projection.cols());
  p.col(static_cast<Eigen::Index>(cell)) = projection.col(static_cast<Eigen::Index>(cell));
  return p;
}

ConceptWorld NonLearnableInstance::as_world() const {
  ConceptWorld w;
  w.config.concept_dim = concept_dim();
  w.config.feature_dim = feature_dim();
  w.config.sparsity = 1;
  w.config.law = SupportLaw::one_hot_cells;
  w.config.noise_variance = 0.0;
  w.config.value_low = 1.0;
  w.config.value_high = 1.0;
  w.w_star = Vector::Ones(static_cast<Eigen::Index>(concept_dim()));
  w.projection = projection;
  return w;
}

NonLearnableInstance make_nonlearnable_instance(std::size_t concept_dim, std::size_t feature_dim, Rng& rng) {
  if (feature_dim > concept_dim) {
    throw ConfigError("non-learnable instance needs d2 <= d1 (got d2=" + std::to_string(feature_dim) +
                      ", d1=" + std::to_string(concept_dim) + ")");
  }
  return NonLearnableInstance{make_superposition_map(concept_dim, feature_dim, rng)};
}

}  // namespace suplab
