#pragma once

#include "dfb/framebuffer.hpp"

#include <map>
#include <span>

namespace dfb {

/// Image-parallel tile operation: one input, or the per-pixel mean of K
/// redundant inputs. A tile declaring children > 0 sets K for the frame.
class ImageParallelOp final : public TileOperation {
 public:
  explicit ImageParallelOp(int expectedInputs = 1) : defaultExpected_(expectedInputs) {}

  void newFrame() override;
  void process(const Tile& tile) override;
  std::string pendingDescription() const override;

 private:
  int defaultExpected_;
  int expected_ = 1;
  int received_ = 0;
  std::vector<Tile> inputs_;
};

/// Generation bookkeeping for one tile's dependency tree.
///
/// Generation 0 holds a single tile. The tiles of generation g declare, in
/// total, how many tiles generation g+1 contains. Tiles may arrive in any
/// order; early generations are parked until their generation is current.
class DependencyTracker {
 public:
  void reset();
  /// Accounts one arrival. Throws ProtocolError for a tile the tree cannot contain.
  void account(const Tile& tile);
  bool complete() const { return complete_; }
  std::uint32_t currentGeneration() const { return currentGen_; }
  std::uint32_t missing() const { return missing_; }

 private:
  struct Parked {
    std::uint32_t count = 0;
    std::uint64_t children = 0;
  };
  void checkTreeComplete();

  std::uint32_t currentGen_ = 0;
  std::uint32_t missing_ = 1;  // a generation 0 tile starts the tree
  std::uint64_t nextChildren_ = 0;
  bool complete_ = false;
  std::map<std::uint32_t, Parked> parked_;
};

/// Depth-sorted per-pixel compositing of every buffered fragment, front to back.
/// Fragments with all-zero RGBA are skipped (they are exact no-ops). Ties in
/// depth are broken by generation, then by fragment RGBA, giving a total order
/// that does not depend on arrival order or on which rank produced a fragment.
void sortAndBlend(std::span<const Tile> tiles, Tile& out);

/// Sort-last compositing tile operation for the data- and mixed-parallel renderers.
class AlphaBlendOp final : public TileOperation {
 public:
  void newFrame() override;
  void process(const Tile& tile) override;
  std::string pendingDescription() const override;

  const DependencyTracker& tracker() const { return tracker_; }

 private:
  std::vector<Tile> buffered_;
  DependencyTracker tracker_;
};

}  // namespace dfb
