#include "dfb/tile_ops.hpp"

#include "dfb/errors.hpp"
#include "dfb/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <string>

namespace dfb {

void ImageParallelOp::newFrame() {
  expected_ = defaultExpected_;
  received_ = 0;
  inputs_.clear();
}

void ImageParallelOp::process(const Tile& tile) {
  if (received_ == 0 && tile.children > 0) expected_ = static_cast<int>(tile.children);
  if (received_ >= expected_)
    throw UsageError("image-parallel tile " + std::to_string(tile.tileID) + " received more inputs than expected");
  ++received_;
  inputs_.push_back(tile);
  if (received_ < expected_) return;

  Tile& out = finishedTile();
  if (expected_ == 1) {
    out = std::move(inputs_.front());
  } else {
    out = inputs_.front();
    out.children = 0;
    // Sum sorted values so the mean is independent of arrival order.
    std::vector<float> values(inputs_.size());
    const auto n = static_cast<float>(inputs_.size());
    for (Eigen::Index i = 0; i < out.color.size(); ++i) {
      for (std::size_t k = 0; k < inputs_.size(); ++k) values[k] = inputs_[k].color.data()[i];
      std::sort(values.begin(), values.end());
      float sum = 0.0f;
      for (float v : values) sum += v;
      out.color.data()[i] = sum / n;
    }
    for (const auto& in : inputs_) out.depth = out.depth.cwiseMin(in.depth);
  }
  inputs_.clear();
  complete();
}

std::string ImageParallelOp::pendingDescription() const {
  return "received " + std::to_string(received_) + " of " + std::to_string(expected_) + " inputs";
}

void DependencyTracker::reset() {
  currentGen_ = 0;
  missing_ = 1;
  nextChildren_ = 0;
  complete_ = false;
  parked_.clear();
}

void DependencyTracker::account(const Tile& tile) {
  if (complete_) throw ProtocolError("tile arrived after its dependency tree completed");
  if (tile.generation < currentGen_)
    throw ProtocolError("tile for already-completed generation " + std::to_string(tile.generation));
  if (tile.generation > currentGen_) {
    auto& p = parked_[tile.generation];
    ++p.count;
    p.children += tile.children;
    return;
  }
  --missing_;
  nextChildren_ += tile.children;
  checkTreeComplete();
}

void DependencyTracker::checkTreeComplete() {
  while (missing_ == 0) {
    if (nextChildren_ == 0) {
      if (!parked_.empty())
        throw ProtocolError("child tile for generation " + std::to_string(parked_.begin()->first) +
                            " which no parent declared");
      complete_ = true;
      return;
    }
    ++currentGen_;
    missing_ = static_cast<std::uint32_t>(nextChildren_);
    nextChildren_ = 0;
    if (auto it = parked_.find(currentGen_); it != parked_.end()) {
      if (it->second.count > missing_)
        throw ProtocolError("generation " + std::to_string(currentGen_) + " received more tiles than declared");
      missing_ -= it->second.count;
      nextChildren_ += it->second.children;
      parked_.erase(it);
    }
  }
}

namespace {

struct FragmentRef {
  float depth;
  std::uint32_t generation;
  const float* rgba;
};

bool fragmentBefore(const FragmentRef& a, const FragmentRef& b) {
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.generation != b.generation) return a.generation < b.generation;
  return std::lexicographical_compare(a.rgba, a.rgba + 4, b.rgba, b.rgba + 4);
}

}  // namespace

void sortAndBlend(std::span<const Tile> tiles, Tile& out) {
  if (tiles.empty()) throw UsageError("sortAndBlend needs at least one tile");
  const Tile& first = tiles.front();
  out.frameIndex = first.frameIndex;
  out.tileID = first.tileID;
  out.coords = first.coords;
  out.accumulationID = first.accumulationID;
  out.generation = 0;
  out.children = 0;
  out.resize(first.region);

  std::vector<FragmentRef> frags;
  frags.reserve(tiles.size());
  const Eigen::Index n = first.region.area();
  for (Eigen::Index i = 0; i < n; ++i) {
    frags.clear();
    for (const Tile& t : tiles) {
      const float* rgba = t.color.col(i).data();
      if (rgba[0] == 0.0f && rgba[1] == 0.0f && rgba[2] == 0.0f && rgba[3] == 0.0f) continue;
      frags.push_back({t.depth[i], t.generation, rgba});
    }
    std::sort(frags.begin(), frags.end(), fragmentBefore);
    auto acc = out.color.col(i);
    float depth = std::numeric_limits<float>::infinity();
    for (const auto& f : frags) {
      const Eigen::Map<const Eigen::Vector4f> c(f.rgba);
      if (c[3] > 0.0f && depth == std::numeric_limits<float>::infinity()) depth = f.depth;
      blendUnder(acc, c);
    }
    out.depth[i] = depth;
  }
}

void AlphaBlendOp::newFrame() {
  buffered_.clear();
  tracker_.reset();
}

void AlphaBlendOp::process(const Tile& tile) {
  tracker_.account(tile);
  buffered_.push_back(tile);
  if (!tracker_.complete()) return;
  sortAndBlend(buffered_, finishedTile());
  buffered_.clear();
  complete();
}

std::string AlphaBlendOp::pendingDescription() const {
  return "generation " + std::to_string(tracker_.currentGeneration()) + " missing " +
         std::to_string(tracker_.missing()) + " tiles";
}

}  // namespace dfb
