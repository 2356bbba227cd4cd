#include "dfb/framebuffer.hpp"

#include "dfb/codec.hpp"
#include "dfb/errors.hpp"
#include "dfb/geometry.hpp"
#include "dfb/wire.hpp"

#include <cmath>
#include <sstream>

namespace dfb {

void ToneMapPixelOp::process(Tile& tile) const {
  const float invGamma = 1.0f / gamma_;
  auto rgb = tile.color.topRows<3>().array();
  rgb = (rgb * exposure_).max(0.0f).pow(invGamma);
}

DistributedFrameBuffer::DistributedFrameBuffer(Messenger& messenger, const FrameConfig& config, Options options)
    : messenger_(messenger),
      options_(options),
      grid_(config, messenger.size()),
      workers_(options.workerThreads) {
  if (options_.displayRank < 0 || options_.displayRank >= messenger.size())
    throw ConfigError("display rank out of range");
  owned_ = grid_.ownedBy(rank());
  localIndex_.assign(grid_.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    localIndex_[owned_[i]] = i;
    ownedTiles_.push_back(std::make_unique<OwnedTile>());
  }
  messenger_.registerObject(options_.objectId,
                            [this](int, std::vector<std::byte> payload) { onTileMessage(std::move(payload)); });
  messenger_.registerObject(options_.objectId + 1,
                            [this](int, std::vector<std::byte> payload) { onFinalPixels(std::move(payload)); });
}

DistributedFrameBuffer::~DistributedFrameBuffer() {
  messenger_.unregisterObject(options_.objectId);
  messenger_.unregisterObject(options_.objectId + 1);
  workers_.waitIdle();
}

std::uint32_t DistributedFrameBuffer::frameIndex() const {
  std::lock_guard lock(frameMutex_);
  return frameIndex_;
}

std::size_t DistributedFrameBuffer::pendingTiles() const {
  std::lock_guard lock(frameMutex_);
  return pending_;
}

void DistributedFrameBuffer::beginFrame(const TileOpFactory& factory, PixelOpList pixelOps,
                                        std::uint32_t accumulationID) {
  std::vector<Tile> replay;
  std::lock_guard lock(frameMutex_);
  if (inFrame_) throw UsageError("beginFrame while the previous frame is still open");
  ++frameIndex_;
  accumulationID_ = accumulationID;
  pixelOps_ = std::move(pixelOps);
  const bool accumulate = config().accumulationEnabled;
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    auto& ot = *ownedTiles_[i];
    const auto& desc = grid_[owned_[i]];
    ot.op = factory(desc);
    ot.op->attach(*this, desc);
    ot.op->newFrame();
    ot.completed = false;
    ot.sawInput = false;
    ot.trace = TileTrace{desc.tileID, {}, {}};
    if (accumulate && (accumulationID == 0 || ot.passes == 0)) {
      const auto area = desc.region.area();
      ot.sum.setZero(4, area);
      ot.lumSum.setZero(area);
      ot.lumSumSq.setZero(area);
      ot.passes = 0;
    }
  }
  pending_ = owned_.size();
  inFrame_ = true;
  fault_ = nullptr;
  {
    std::lock_guard stageLock(stageMutex_);
    stage_.clear();
  }
  tilesPosted_ = 0;
  tilesProcessed_ = 0;
  if (auto it = early_.find(frameIndex_); it != early_.end()) {
    replay = std::move(it->second);
    early_.erase(it);
  }
  tilesQueuedFuture_ = replay.size();
  for (auto& tile : replay) schedule(std::move(tile));
}

void DistributedFrameBuffer::setTile(Tile tile) {
  const TileDescriptor& desc = grid_.at(tile.coords);
  if (tile.region != desc.region) throw UsageError("tile region does not match its grid cell");
  tile.tileID = desc.tileID;
  {
    std::lock_guard lock(frameMutex_);
    if (!inFrame_) throw UsageError("setTile outside of a frame");
    if (tile.frameIndex < frameIndex_) throw ProtocolError("setTile with a stale frame index");
    if (tile.frameIndex > frameIndex_) throw UsageError("setTile for a frame that has not begun");
    ++tilesPosted_;
    if (desc.ownerRank == rank()) {
      schedule(std::move(tile));
      return;
    }
  }
  messenger_.post(desc.ownerRank, options_.objectId, serializeTile(tile));
}

void DistributedFrameBuffer::onTileMessage(std::vector<std::byte> payload) {
  try {
    Tile tile = deserializeTile(payload, config().tilesX());
    if (tile.tileID >= grid_.size() || !ownsTile(tile.tileID))
      throw ProtocolError("received tile " + std::to_string(tile.tileID) + " this rank does not own");
    std::lock_guard lock(frameMutex_);
    if (tile.frameIndex > frameIndex_) {
      early_[tile.frameIndex].push_back(std::move(tile));
    } else if (tile.frameIndex == frameIndex_ && inFrame_) {
      schedule(std::move(tile));
    } else {
      throw ProtocolError("tile " + std::to_string(tile.tileID) + " arrived for finished frame " +
                          std::to_string(tile.frameIndex));
    }
  } catch (...) {
    recordFault(std::current_exception());
  }
}

// Caller holds frameMutex_ and the frame is open.
void DistributedFrameBuffer::schedule(Tile tile) {
  OwnedTile& ot = owned(tile.tileID);
  workers_.submit([this, &ot, tile = std::move(tile)] {
    try {
      std::lock_guard lock(ot.mutex);
      if (!ot.sawInput) {
        ot.sawInput = true;
        ot.trace.firstInput = std::chrono::steady_clock::now();
      }
      ++tilesProcessed_;
      ot.op->process(tile);
    } catch (...) {
      recordFault(std::current_exception());
    }
  });
}

void DistributedFrameBuffer::tileIsCompleted(TileOperation& op) {
  const std::uint32_t tileID = op.descriptor().tileID;
  OwnedTile& ot = owned(tileID);
  if (ot.completed) throw UsageError("tile " + std::to_string(tileID) + " completed twice in one frame");
  ot.completed = true;

  std::uint32_t frame = 0;
  {
    std::lock_guard lock(frameMutex_);
    frame = frameIndex_;
  }

  Tile display = op.finished();
  if (config().accumulationEnabled) {
    const auto n = display.color.cols();
    ot.sum += display.color.cast<double>();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lum = luminance(display.color.col(i).cast<double>().eval());
      ot.lumSum[i] += lum;
      ot.lumSumSq[i] += lum * lum;
    }
    ++ot.passes;
    display.color = (ot.sum / static_cast<double>(accumulationID_ + 1)).cast<float>();
  }
  for (const auto& pixelOp : pixelOps_) pixelOp->process(display);

  const auto encoded = encodeDisplayPixels(display.color, config().colorFormat);
  if (!encoded.empty()) {
    if (options_.route == FinalPixelRoute::Gather) {
      std::lock_guard lock(stageMutex_);
      ByteWriter w(stage_);
      w.put(tileID);
      w.put(encoded);
    } else {
      std::vector<std::byte> msg;
      ByteWriter w(msg);
      w.put(frame);
      w.put(tileID);
      w.put(encoded);
      messenger_.post(options_.displayRank, options_.objectId + 1, std::move(msg));
    }
  }
  ot.trace.finalized = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(frameMutex_);
    --pending_;
  }
  frameCv_.notify_all();
}

void DistributedFrameBuffer::onFinalPixels(std::vector<std::byte> payload) {
  try {
    ByteReader r(payload);
    const auto frame = r.get<std::uint32_t>();
    {
      std::lock_guard lock(finalMutex_);
      finalBlocks_[frame].push_back(std::move(payload));
    }
    finalCv_.notify_all();
  } catch (...) {
    recordFault(std::current_exception());
  }
}

void DistributedFrameBuffer::recordFault(std::exception_ptr fault) {
  {
    std::lock_guard lock(frameMutex_);
    if (!fault_) fault_ = std::move(fault);
  }
  frameCv_.notify_all();
}

void DistributedFrameBuffer::rethrowFault() {
  std::exception_ptr fault;
  {
    std::lock_guard lock(frameMutex_);
    fault = fault_;
  }
  if (fault) std::rethrow_exception(fault);
}

std::string DistributedFrameBuffer::starvationReport() const {
  std::ostringstream os;
  os << "rank " << rank() << " frame " << frameIndex_ << ": tiles never completed:";
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    auto& ot = *ownedTiles_[i];
    std::lock_guard lock(ot.mutex);
    if (!ot.completed) os << " [tile " << owned_[i] << ": " << ot.op->pendingDescription() << "]";
  }
  return os.str();
}

const Image* DistributedFrameBuffer::endFrame() {
  const auto deadline = std::chrono::steady_clock::now() + options_.frameDeadline;
  std::uint32_t frame = 0;
  {
    std::unique_lock lock(frameMutex_);
    if (!inFrame_) throw UsageError("endFrame without beginFrame");
    const bool done = frameCv_.wait_until(lock, deadline, [&] { return pending_ == 0 || fault_; });
    frame = frameIndex_;
    if (!done) {
      inFrame_ = false;
      lock.unlock();
      throw TimeoutError(starvationReport());
    }
    inFrame_ = false;
  }
  workers_.waitIdle();
  rethrowFault();

  const bool display = rank() == options_.displayRank;
  const ColorFormat format = config().colorFormat;
  if (display && format != ColorFormat::NONE) {
    image_.allocate(config().width, config().height, format);
  } else {
    image_ = Image{};
  }

  auto blitBlocks = [&](std::span<const std::byte> blocks) {
    ByteReader r(blocks);
    while (r.remaining() > 0) {
      const auto tileID = r.get<std::uint32_t>();
      if (tileID >= grid_.size()) throw IntegrityError("final pixels for an unknown tile");
      const Region& region = grid_[tileID].region;
      image_.blit(region, r.take(static_cast<std::size_t>(region.area()) * bytesPerPixel(format)));
    }
  };

  if (display && format != ColorFormat::NONE && options_.route == FinalPixelRoute::PerTileSends) {
    std::vector<std::vector<std::byte>> blocks;
    {
      std::unique_lock lock(finalMutex_);
      if (!finalCv_.wait_until(lock, deadline, [&] { return finalBlocks_[frame].size() == grid_.size(); }))
        throw TimeoutError("display rank did not receive every final tile");
      blocks = std::move(finalBlocks_[frame]);
      finalBlocks_.erase(frame);
    }
    for (const auto& block : blocks) blitBlocks(std::span(block).subspan(4));
  }

  std::vector<std::byte> local;
  {
    std::lock_guard lock(stageMutex_);
    if (!stage_.empty()) local = messenger_.compressing() ? compress(stage_) : std::move(stage_);
    stage_.clear();
  }

  stats_ = FrameStats{};
  stats_.frameIndex = frame;
  stats_.gatherBytesSent = local.size();
  auto gathered = messenger_.gather(options_.displayRank, local);
  if (gathered) {
    for (int r = 0; r < numRanks(); ++r) {
      const auto block = gathered->block(static_cast<std::size_t>(r));
      stats_.gatherBlockSizes.push_back(block.size());
      if (block.empty() || format == ColorFormat::NONE) continue;
      if (messenger_.compressing())
        blitBlocks(decompress(block));
      else
        blitBlocks(block);
    }
  }

  stats_.tilesPosted = tilesPosted_;
  stats_.tilesProcessed = tilesProcessed_;
  stats_.tilesQueuedFuture = tilesQueuedFuture_;
  for (const auto& ot : ownedTiles_) stats_.traces.push_back(ot->trace);

  return display && format != ColorFormat::NONE ? &image_ : nullptr;
}

std::optional<double> DistributedFrameBuffer::tileError(std::uint32_t tileID) const {
  if (!config().accumulationEnabled || tileID >= grid_.size() || !ownsTile(tileID)) return std::nullopt;
  const OwnedTile& ot = owned(tileID);
  if (ot.passes < 2) return std::nullopt;
  const double n = ot.passes;
  const Eigen::ArrayXd var =
      ((ot.lumSumSq.array() - ot.lumSum.array().square() / n) / (n - 1.0)).max(0.0);
  return var.mean();
}

}  // namespace dfb
