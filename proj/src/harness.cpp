#include "dfb/harness.hpp"

#include "dfb/codec.hpp"
#include "dfb/errors.hpp"
#include "dfb/inproc_transport.hpp"
#include "dfb/tcp_transport.hpp"
#include "dfb/tile_ops.hpp"
#include "dfb/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace dfb {

RendererKind parseRendererKind(std::string_view name) {
  if (name == "image") return RendererKind::Image;
  if (name == "data") return RendererKind::Data;
  if (name == "mixed") return RendererKind::Mixed;
  throw ConfigError("unknown renderer '" + std::string(name) + "'");
}

std::string_view toString(RendererKind kind) {
  switch (kind) {
    case RendererKind::Image: return "image";
    case RendererKind::Data: return "data";
    case RendererKind::Mixed: return "mixed";
  }
  return "?";
}

void RunConfig::validate() const {
  if (transport != "inproc" && transport != "tcp") throw ConfigError("transport must be inproc or tcp");
  if (transport == "tcp" && manifest.empty()) throw ConfigError("tcp transport requires a rank manifest");
  if (numRanks < 1) throw ConfigError("need at least one rank");
  if (frames < 1) throw ConfigError("need at least one frame");
  if (accumulationPasses < 1) throw ConfigError("accumulation passes must be >= 1");
  if (spp < 1) throw ConfigError("spp must be >= 1");
  if (renderer == RendererKind::Mixed && replication < 1) throw ConfigError("mixed renderer requires replication >= 1");
  if (renderer == RendererKind::Data && replication != 1) throw ConfigError("data-parallel renderer requires replication 1");
  FrameConfig{width, height, tileSize, format, accumulationPasses > 1}.validate();
  for (const auto& d : delays)
    if (d.rank < 0 || d.rank >= numRanks) throw ConfigError("delayed rank out of range");
}

SceneConfig RunConfig::scene() const {
  SceneConfig s = sceneFile.empty() ? SceneConfig{} : loadSceneFile(sceneFile);
  if (volumeDims) s.volumeDims = *volumeDims;
  if (sceneFile.empty()) {
    // Default distribution: one brick per rank.
    s.brickGrid = brickGrid ? *brickGrid : defaultBrickGrid(renderer == RendererKind::Image ? 1 : numRanks);
  } else if (brickGrid) {
    s.brickGrid = *brickGrid;
  }
  switch (renderer) {
    case RendererKind::Image: s.replication = numRanks; break;
    case RendererKind::Data: s.replication = 1; break;
    case RendererKind::Mixed: s.replication = replication; break;
  }
  s.samplesPerPixel = spp;
  s.seed = seed;
  return s;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double medianAbsoluteDeviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(dev);
}

bool writePPM(const Image& image, const std::filesystem::path& path) {
  if (image.format == ColorFormat::NONE || !image.allocated()) {
    std::cerr << "warning: no display pixels (format none); skipping " << path << "\n";
    return false;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const std::size_t pixels = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  std::vector<std::byte> rgba8;
  std::span<const std::byte> src = image.bytes;
  if (image.format == ColorFormat::RGBAF32) {
    rgba8 = encodeDisplayPixels(decodeDisplayPixels(image.bytes, ColorFormat::RGBAF32), ColorFormat::RGBA8);
    src = rgba8;
  }
  std::vector<char> rgb(pixels * 3);
  for (std::size_t i = 0; i < pixels; ++i)
    for (int c = 0; c < 3; ++c) rgb[i * 3 + static_cast<std::size_t>(c)] = static_cast<char>(src[i * 4 + static_cast<std::size_t>(c)]);
  out.write(rgb.data(), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
  return true;
}

void writeCSV(const std::vector<TimingRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "frame,rank,local_render_s,composite_overhead_s,frame_total_s,bytes_sent,bytes_recv,msgs_sent\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& r : records)
    out << r.frame << ',' << r.rank << ',' << r.localRenderSeconds << ',' << r.compositeOverheadSeconds << ','
        << r.frameTotalSeconds << ',' << r.bytesSent << ',' << r.bytesReceived << ',' << r.messagesSent << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TimingRecord> readCSV(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<TimingRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    TimingRecord r;
    char comma = 0;
    ls >> r.frame >> comma >> r.rank >> comma >> r.localRenderSeconds >> comma >> r.compositeOverheadSeconds >> comma >>
        r.frameTotalSeconds >> comma >> r.bytesSent >> comma >> r.bytesReceived >> comma >> r.messagesSent;
    if (!ls) throw std::runtime_error("malformed CSV row: " + line);
    out.push_back(r);
  }
  return out;
}

namespace {

class BufferingSink final : public TileSink {
 public:
  void setTile(Tile tile) override {
    std::lock_guard lock(mutex_);
    tiles_.push_back(std::move(tile));
  }
  std::vector<Tile> take() { return std::move(tiles_); }

 private:
  std::mutex mutex_;
  std::vector<Tile> tiles_;
};

void renderWith(const RenderContext& ctx, TileSink& sink, RendererKind kind, std::span<const Brick> localBricks,
                std::span<const Box3f> allBounds, std::span<const std::vector<int>> shareLists) {
  switch (kind) {
    case RendererKind::Image: renderFrameImageParallel(ctx, sink, localBricks); break;
    case RendererKind::Data: renderFrameDataParallel(ctx, sink, localBricks, allBounds); break;
    case RendererKind::Mixed: renderFrameMixed(ctx, sink, localBricks, allBounds, shareLists); break;
  }
}

std::int64_t nanos(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t.time_since_epoch()).count();
}

// Per (pass, rank) sample shipped to the display rank after each frame.
struct PassSample {
  std::int64_t start = 0;
  std::int64_t renderEnd = 0;
  std::int64_t frameEnd = 0;
};

}  // namespace

const Image* baselineDirectSend(DistributedFrameBuffer& dfb, Messenger& messenger, const RenderContext& ctx,
                                RendererKind kind, std::span<const Brick> localBricks,
                                std::span<const Box3f> allBounds, std::span<const std::vector<int>> shareLists,
                                std::chrono::steady_clock::time_point* renderEnd) {
  BufferingSink local;
  renderWith(ctx, local, kind, localBricks, allBounds, shareLists);
  if (renderEnd) *renderEnd = std::chrono::steady_clock::now();
  messenger.barrier();
  for (auto& tile : local.take()) dfb.setTile(std::move(tile));
  return dfb.endFrame();
}

RunResult runRank(const RunConfig& config, std::shared_ptr<Transport> transport) {
  const int numRanks = transport->size();
  const int rank = transport->rank();
  RunConfig cfg = config;
  cfg.numRanks = numRanks;

  Messenger::Options mopts;
  mopts.compression = cfg.compression;
  Messenger messenger(transport, mopts);

  FrameConfig frame{cfg.width, cfg.height, cfg.tileSize, cfg.format, cfg.accumulationPasses > 1};
  DistributedFrameBuffer::Options dopts;
  dopts.route = cfg.route;
  DistributedFrameBuffer dfb(messenger, frame, dopts);

  const SceneConfig scene = cfg.scene();
  scene.validate(numRanks);
  const std::vector<Brick> bricks = scene.loadBricks(rank, numRanks);
  const std::vector<Box3f> allBounds = scene.brickBounds();
  const auto shareLists = scene.shareLists(numRanks);

  std::chrono::milliseconds delay{0};
  for (const auto& d : cfg.delays)
    if (d.rank == rank) delay = d.delay;
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int threads = cfg.renderThreads > 0 ? cfg.renderThreads : std::max(1, hw / numRanks);

  TileOpFactory factory;
  if (cfg.renderer == RendererKind::Image)
    factory = [](const TileDescriptor&) { return std::make_unique<ImageParallelOp>(); };
  else
    factory = [](const TileDescriptor&) { return std::make_unique<AlphaBlendOp>(); };

  RunResult result;
  const float aspect = static_cast<float>(cfg.width) / static_cast<float>(cfg.height);
  for (int f = 0; f < cfg.frames; ++f) {
    const Camera camera = orbitCamera(f, cfg.frames, scene.volumeBounds(), aspect);
    const MessengerStats before = messenger.stats();
    std::vector<PassSample> samples;
    Image lastImage;
    for (int pass = 0; pass < cfg.accumulationPasses; ++pass) {
      messenger.barrier();
      PassSample s;
      const auto start = std::chrono::steady_clock::now();
      s.start = nanos(start);
      dfb.beginFrame(factory, {}, static_cast<std::uint32_t>(pass));
      RenderContext ctx = RenderContext::forFrame(dfb, camera, scene);
      ctx.threads = threads;
      ctx.renderDelay = delay;
      const Image* img = nullptr;
      if (cfg.baseline) {
        std::chrono::steady_clock::time_point renderEnd;
        img = baselineDirectSend(dfb, messenger, ctx, cfg.renderer, bricks, allBounds, shareLists, &renderEnd);
        s.renderEnd = nanos(renderEnd);
      } else {
        renderWith(ctx, dfb, cfg.renderer, bricks, allBounds, shareLists);
        s.renderEnd = nanos(std::chrono::steady_clock::now());
        img = dfb.endFrame();
      }
      s.frameEnd = nanos(std::chrono::steady_clock::now());
      samples.push_back(s);
      if (img) lastImage = *img;
    }
    const MessengerStats after = messenger.stats();

    // Ship this rank's timing to the display rank.
    std::vector<std::byte> packed;
    ByteWriter w(packed);
    for (const auto& s : samples) {
      w.put(s.start);
      w.put(s.renderEnd);
      w.put(s.frameEnd);
    }
    w.put(after.bytesSent - before.bytesSent);
    w.put(after.bytesReceived - before.bytesReceived);
    w.put(after.messagesSent - before.messagesSent);
    auto gathered = messenger.gather(0, packed);
    if (!gathered) continue;

    const auto passes = static_cast<std::size_t>(cfg.accumulationPasses);
    std::vector<std::vector<PassSample>> all(static_cast<std::size_t>(numRanks));
    std::vector<std::array<std::uint64_t, 3>> traffic(static_cast<std::size_t>(numRanks));
    for (int r = 0; r < numRanks; ++r) {
      ByteReader rd(gathered->block(static_cast<std::size_t>(r)));
      for (std::size_t p = 0; p < passes; ++p) {
        PassSample s;
        s.start = rd.get<std::int64_t>();
        s.renderEnd = rd.get<std::int64_t>();
        s.frameEnd = rd.get<std::int64_t>();
        all[static_cast<std::size_t>(r)].push_back(s);
      }
      for (auto& t : traffic[static_cast<std::size_t>(r)]) t = rd.get<std::uint64_t>();
    }
    double frameOverhead = 0.0;
    std::vector<TimingRecord> rows(static_cast<std::size_t>(numRanks));
    for (std::size_t p = 0; p < passes; ++p) {
      std::int64_t slowestRender = 0;
      std::int64_t lastEnd = 0;
      for (const auto& rs : all) {
        slowestRender = std::max(slowestRender, rs[p].renderEnd);
        lastEnd = std::max(lastEnd, rs[p].frameEnd);
      }
      frameOverhead += std::max<std::int64_t>(0, lastEnd - slowestRender) * 1e-9;
      for (int r = 0; r < numRanks; ++r) {
        const auto& s = all[static_cast<std::size_t>(r)][p];
        auto& row = rows[static_cast<std::size_t>(r)];
        row.localRenderSeconds += static_cast<double>(s.renderEnd - s.start) * 1e-9;
        row.frameTotalSeconds += static_cast<double>(s.frameEnd - s.start) * 1e-9;
        row.compositeOverheadSeconds += static_cast<double>(std::max<std::int64_t>(0, s.frameEnd - slowestRender)) * 1e-9;
      }
    }
    for (int r = 0; r < numRanks; ++r) {
      auto& row = rows[static_cast<std::size_t>(r)];
      row.frame = f;
      row.rank = r;
      row.bytesSent = traffic[static_cast<std::size_t>(r)][0];
      row.bytesReceived = traffic[static_cast<std::size_t>(r)][1];
      row.messagesSent = traffic[static_cast<std::size_t>(r)][2];
      result.timings.push_back(row);
    }
    result.frameOverheads.push_back(frameOverhead);
    result.frameSeconds.push_back(rows[0].frameTotalSeconds);
    result.images.push_back(std::move(lastImage));
  }
  messenger.barrier();
  result.summary = {median(result.frameSeconds), medianAbsoluteDeviation(result.frameSeconds),
                    median(result.frameOverheads)};
  return result;
}

namespace {

void writeOutputs(const RunConfig& cfg, const RunResult& result) {
  if (cfg.outPrefix.empty()) return;
  {
    std::ofstream m(cfg.outPrefix + "_manifest.txt");
    m << "ranks " << cfg.numRanks << "\ntransport " << cfg.transport << "\nwidth " << cfg.width << "\nheight "
      << cfg.height << "\ntile_size " << cfg.tileSize << "\nrenderer " << toString(cfg.renderer) << "\nreplication "
      << cfg.replication << "\nframes " << cfg.frames << "\nformat " << toString(cfg.format) << "\ncompression "
      << toString(cfg.compression) << "\ncompression_active " << compressionEnabled(cfg.compression, cfg.numRanks)
      << "\ncodec " << kCodecName << "\nbaseline " << cfg.baseline << "\nspp " << cfg.spp << "\naccum "
      << cfg.accumulationPasses << "\nseed " << cfg.seed << "\nscene " << (cfg.sceneFile.empty() ? "default" : cfg.sceneFile)
      << '\n';
    for (const auto& d : cfg.delays) m << "delay_rank " << d.rank << ':' << d.delay.count() << '\n';
  }
  for (std::size_t f = 0; f < result.images.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "_frame%04zu", f);
    if (cfg.format != ColorFormat::NONE) writePPM(result.images[f], cfg.outPrefix + name + ".ppm");
    else if (f == 0) std::cerr << "warning: format none, no images written\n";
    if (cfg.writeRaw && result.images[f].allocated()) {
      std::ofstream raw(cfg.outPrefix + name + ".raw", std::ios::binary);
      raw.write(reinterpret_cast<const char*>(result.images[f].bytes.data()),
                static_cast<std::streamsize>(result.images[f].bytes.size()));
    }
  }
  writeCSV(result.timings, cfg.outPrefix + "_timing.csv");
}

}  // namespace

RunResult runBenchmark(const RunConfig& config) {
  RunConfig cfg = config;
  if (cfg.transport == "tcp") {
    if (cfg.manifest.empty()) throw ConfigError("tcp transport requires a rank manifest");
    const auto peers = loadManifest(cfg.manifest);
    cfg.numRanks = static_cast<int>(peers.size());
    cfg.validate();
    if (cfg.rank < 0 || cfg.rank >= cfg.numRanks) throw ConfigError("tcp transport needs --rank within the manifest");
    auto transport = std::make_shared<TcpTransport>(cfg.rank, peers);
    RunResult result = runRank(cfg, transport);
    if (cfg.rank == 0) writeOutputs(cfg, result);
    return result;
  }
  cfg.validate();
  InprocFabric fabric(cfg.numRanks);
  std::vector<RunResult> results(static_cast<std::size_t>(cfg.numRanks));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.numRanks));
  {
    std::vector<std::jthread> ranks;
    for (int r = 0; r < cfg.numRanks; ++r)
      ranks.emplace_back([&, r] {
        try {
          results[static_cast<std::size_t>(r)] = runRank(cfg, fabric.endpoint(r));
        } catch (...) {
          errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  writeOutputs(cfg, results[0]);
  return std::move(results[0]);
}

}  // namespace dfb
