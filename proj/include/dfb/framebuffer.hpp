#pragma once

#include "dfb/messenger.hpp"
#include "dfb/task_pool.hpp"
#include "dfb/tile.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace dfb {

class TileOperation;

/// Receives finished tiles from tile operations.
class TileCompletionSink {
 public:
  virtual ~TileCompletionSink() = default;
  virtual void tileIsCompleted(TileOperation& op) = 0;
};

/// Accepts rendered tiles for the current frame.
class TileSink {
 public:
  virtual ~TileSink() = default;
  virtual void setTile(Tile tile) = 0;
};

/// Per-owned-tile task. process() is called once per delivered input, in any
/// order, never concurrently for one instance. When the inputs are complete
/// the operation fills finished() and calls complete().
class TileOperation {
 public:
  virtual ~TileOperation() = default;

  virtual void newFrame() = 0;
  virtual void process(const Tile& tile) = 0;
  /// Starvation diagnostics: inputs still outstanding.
  virtual std::string pendingDescription() const = 0;

  void attach(TileCompletionSink& sink, const TileDescriptor& descriptor) {
    sink_ = &sink;
    descriptor_ = descriptor;
  }
  const TileDescriptor& descriptor() const { return descriptor_; }
  const Tile& finished() const { return finished_; }

 protected:
  Tile& finishedTile() { return finished_; }
  void complete() { sink_->tileIsCompleted(*this); }

 private:
  TileCompletionSink* sink_ = nullptr;
  TileDescriptor descriptor_;
  Tile finished_;
};

using TileOpFactory = std::function<std::unique_ptr<TileOperation>(const TileDescriptor&)>;

/// Renderer-independent post-process applied on the tile owner.
class PixelOp {
 public:
  virtual ~PixelOp() = default;
  virtual void process(Tile& tile) const = 0;
};

/// out = (exposure * in)^(1/gamma) on the color channels; alpha untouched.
class ToneMapPixelOp final : public PixelOp {
 public:
  explicit ToneMapPixelOp(float exposure = 1.0f, float gamma = 2.2f) : exposure_(exposure), gamma_(gamma) {}
  void process(Tile& tile) const override;

 private:
  float exposure_;
  float gamma_;
};

using PixelOpList = std::vector<std::shared_ptr<const PixelOp>>;

/// How finished pixels reach the display rank.
enum class FinalPixelRoute {
  Gather,        // staged per rank, one gather at end of frame
  PerTileSends,  // one message per finished tile (debug path)
};

struct TileTrace {
  std::uint32_t tileID = 0;
  std::chrono::steady_clock::time_point firstInput;
  std::chrono::steady_clock::time_point finalized;
};

struct FrameStats {
  std::uint32_t frameIndex = 0;
  std::uint64_t tilesPosted = 0;      // setTile calls on this rank
  std::uint64_t tilesProcessed = 0;   // process() calls on this rank
  std::uint64_t tilesQueuedFuture = 0;  // arrivals parked until this frame began
  std::uint64_t gatherBytesSent = 0;  // this rank's gather contribution
  std::vector<std::size_t> gatherBlockSizes;  // display rank only, per rank
  std::vector<TileTrace> traces;      // owned tiles
};

/// Per-rank instance of the distributed framebuffer.
///
/// Every rank constructs one with the same ObjectId. Tiles passed to
/// setTile() are routed to their owner, where the frame's tile operation
/// consumes them on a worker pool. Finished tiles are accumulated, run
/// through the pixel ops, encoded, and delivered to the display rank.
class DistributedFrameBuffer final : public TileCompletionSink, public TileSink {
 public:
  struct Options {
    ObjectId objectId = 1;  // also uses objectId + 1 for the per-tile route
    int displayRank = 0;
    FinalPixelRoute route = FinalPixelRoute::Gather;
    std::chrono::milliseconds frameDeadline = std::chrono::seconds(30);
    int workerThreads = 1;
  };

  DistributedFrameBuffer(Messenger& messenger, const FrameConfig& config)
      : DistributedFrameBuffer(messenger, config, Options{}) {}
  DistributedFrameBuffer(Messenger& messenger, const FrameConfig& config, Options options);
  ~DistributedFrameBuffer() override;

  DistributedFrameBuffer(const DistributedFrameBuffer&) = delete;
  DistributedFrameBuffer& operator=(const DistributedFrameBuffer&) = delete;

  int rank() const { return messenger_.rank(); }
  int numRanks() const { return messenger_.size(); }
  const TileGrid& grid() const { return grid_; }
  const FrameConfig& config() const { return grid_.config(); }
  const std::vector<std::uint32_t>& ownedTiles() const { return owned_; }
  bool ownsTile(std::uint32_t tileID) const { return grid_[tileID].ownerRank == rank(); }
  std::uint32_t frameIndex() const;
  std::uint32_t accumulationID() const { return accumulationID_; }

  /// Starts the next frame. Throws UsageError if the previous one is still open.
  void beginFrame(const TileOpFactory& factory, PixelOpList pixelOps = {}, std::uint32_t accumulationID = 0);
  /// Thread-safe. Routes the tile to its owner without waiting.
  void setTile(Tile tile) override;
  void tileIsCompleted(TileOperation& op) override;
  /// Waits for the owned tiles, then gathers to the display rank. Returns the
  /// display image on the display rank when the format is not NONE.
  const Image* endFrame();

  /// Mean unbiased per-pixel luminance variance over accumulated passes;
  /// empty with fewer than two passes or for a tile this rank does not own.
  std::optional<double> tileError(std::uint32_t tileID) const;

  const Image& displayImage() const { return image_; }
  const FrameStats& lastFrameStats() const { return stats_; }
  std::size_t pendingTiles() const;

 private:
  struct OwnedTile {
    std::unique_ptr<TileOperation> op;
    std::mutex mutex;  // serializes process() for this tile
    bool completed = false;
    bool sawInput = false;
    TileTrace trace;
    // accumulation
    Eigen::Matrix<double, 4, Eigen::Dynamic> sum;
    Eigen::VectorXd lumSum;
    Eigen::VectorXd lumSumSq;
    std::uint32_t passes = 0;
  };

  void onTileMessage(std::vector<std::byte> payload);
  void onFinalPixels(std::vector<std::byte> payload);
  void schedule(Tile tile);
  void recordFault(std::exception_ptr fault);
  void rethrowFault();
  std::string starvationReport() const;
  OwnedTile& owned(std::uint32_t tileID) { return *ownedTiles_.at(localIndex_.at(tileID)); }
  const OwnedTile& owned(std::uint32_t tileID) const { return *ownedTiles_.at(localIndex_.at(tileID)); }

  Messenger& messenger_;
  Options options_;
  TileGrid grid_;
  std::vector<std::uint32_t> owned_;
  std::vector<std::size_t> localIndex_;  // tileID -> index in ownedTiles_
  std::vector<std::unique_ptr<OwnedTile>> ownedTiles_;
  PixelOpList pixelOps_;
  std::uint32_t accumulationID_ = 0;

  mutable std::mutex frameMutex_;
  std::condition_variable frameCv_;
  std::uint32_t frameIndex_ = 0;
  bool inFrame_ = false;
  std::size_t pending_ = 0;
  std::map<std::uint32_t, std::vector<Tile>> early_;  // frameIndex -> arrivals
  std::exception_ptr fault_;

  std::mutex stageMutex_;
  std::vector<std::byte> stage_;

  // per-tile route, display rank
  std::mutex finalMutex_;
  std::condition_variable finalCv_;
  std::map<std::uint32_t, std::vector<std::vector<std::byte>>> finalBlocks_;

  std::atomic<std::uint64_t> tilesPosted_{0};
  std::atomic<std::uint64_t> tilesProcessed_{0};
  std::atomic<std::uint64_t> tilesQueuedFuture_{0};
  FrameStats stats_;
  Image image_;

  TaskPool workers_;
};

}  // namespace dfb
