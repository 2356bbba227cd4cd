#pragma once

#include "dfb/framebuffer.hpp"
#include "dfb/renderer.hpp"
#include "dfb/scene.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dfb {

enum class RendererKind { Image, Data, Mixed };

RendererKind parseRendererKind(std::string_view name);
std::string_view toString(RendererKind kind);

struct RankDelay {
  int rank = 0;
  std::chrono::milliseconds delay{0};
};

struct RunConfig {
  int numRanks = 1;
  std::string transport = "inproc";  // inproc | tcp
  std::string manifest;              // tcp only
  int rank = -1;                     // tcp: the rank this process runs
  int width = 512;
  int height = 512;
  int tileSize = kDefaultTileSize;
  RendererKind renderer = RendererKind::Data;
  int replication = 1;
  int frames = 1;
  ColorFormat format = ColorFormat::RGBA8;
  CompressionPolicy compression = CompressionPolicy::Auto;
  bool baseline = false;
  std::vector<RankDelay> delays;
  int spp = 1;
  int accumulationPasses = 1;
  std::string outPrefix;  // empty: write nothing
  std::uint64_t seed = 0;
  std::string sceneFile;
  std::optional<Eigen::Vector3i> volumeDims;
  std::optional<Eigen::Vector3i> brickGrid;
  FinalPixelRoute route = FinalPixelRoute::Gather;
  bool writeRaw = false;  // also dump display bytes as PREFIX_frame%04d.raw
  int renderThreads = 0;  // 0: hardware threads / ranks

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  /// The scene every rank builds for this run.
  SceneConfig scene() const;
};

struct TimingRecord {
  int frame = 0;
  int rank = 0;
  double localRenderSeconds = 0;
  double compositeOverheadSeconds = 0;
  double frameTotalSeconds = 0;
  std::uint64_t bytesSent = 0;
  std::uint64_t bytesReceived = 0;
  std::uint64_t messagesSent = 0;

  bool operator==(const TimingRecord&) const = default;
};

struct Summary {
  double medianFrameSeconds = 0;
  double madFrameSeconds = 0;
  double medianOverheadSeconds = 0;
};

struct RunResult {
  std::vector<Image> images;          // display rank, one per frame
  std::vector<TimingRecord> timings;  // one per (frame, rank)
  std::vector<double> frameOverheads;  // per frame: latest rank's completion - slowest render end
  std::vector<double> frameSeconds;    // per frame: display rank frame total
  Summary summary;
};

double median(std::vector<double> values);
/// Median absolute deviation from the median.
double medianAbsoluteDeviation(const std::vector<double>& values);

/// Binary P6 PPM from an RGBA8 image (alpha dropped). RGBAF32 images are
/// quantized first. Returns false and writes nothing for NONE.
bool writePPM(const Image& image, const std::filesystem::path& path);
void writeCSV(const std::vector<TimingRecord>& records, const std::filesystem::path& path);
std::vector<TimingRecord> readCSV(const std::filesystem::path& path);

/// Runs one rank of the job over `transport`. Only the display rank (0)
/// returns images and timing records.
RunResult runRank(const RunConfig& config, std::shared_ptr<Transport> transport);

/// Runs the whole job: all ranks in-process, or this process's rank over TCP.
/// Writes outputs under config.outPrefix from the display rank.
RunResult runBenchmark(const RunConfig& config);

/// Synchronous direct-send compositing of one sort-last frame: render every
/// fragment locally, barrier, then send all fragments to their owners, who
/// blend with the same sort-and-blend path, then gather.
const Image* baselineDirectSend(DistributedFrameBuffer& dfb, Messenger& messenger, const RenderContext& ctx,
                                RendererKind kind, std::span<const Brick> localBricks,
                                std::span<const Box3f> allBounds, std::span<const std::vector<int>> shareLists,
                                std::chrono::steady_clock::time_point* renderEnd = nullptr);

}  // namespace dfb
