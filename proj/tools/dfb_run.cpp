// Benchmark driver: renders an orbiting volume with a chosen compositing
// strategy and writes images plus per-rank timings.
#include "dfb/errors.hpp"
#include "dfb/harness.hpp"
#include "dfb/tcp_transport.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <iostream>

namespace {

dfb::RankDelay parseDelay(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw dfb::ConfigError("--delay-rank expects R:MS, got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, colon)), std::chrono::milliseconds(std::stoll(text.substr(colon + 1)))};
  } catch (const std::logic_error&) {
    throw dfb::ConfigError("--delay-rank expects R:MS, got '" + text + "'");
  }
}

// Re-executes this binary once per manifest rank and waits for all of them.
int spawnRanks(int argc, char** argv, int numRanks) {
  std::vector<pid_t> children;
  for (int r = 0; r < numRanks; ++r) {
    std::vector<std::string> args(argv, argv + argc);
    args.push_back("--rank");
    args.push_back(std::to_string(r));
    const pid_t pid = fork();
    if (pid < 0) {
      std::perror("fork");
      return 1;
    }
    if (pid == 0) {
      std::vector<char*> cargs;
      for (auto& a : args) cargs.push_back(a.data());
      cargs.push_back(nullptr);
      execv("/proc/self/exe", cargs.data());
      std::perror("execv");
      _exit(127);
    }
    children.push_back(pid);
  }
  int rc = 0;
  for (std::size_t r = 0; r < children.size(); ++r) {
    int status = 0;
    waitpid(children[r], &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      std::cerr << "rank " << r << " failed (status " << status << ")\n";
      rc = 1;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed frame buffer benchmark"};
  dfb::RunConfig cfg;
  std::string renderer = "data", format = "rgba8", compression = "auto", route = "gather";
  std::vector<std::string> delays;
  app.add_option("--ranks", cfg.numRanks, "Number of ranks (inproc)")->check(CLI::PositiveNumber);
  app.add_option("--transport", cfg.transport, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));
  app.add_option("--manifest", cfg.manifest, "TCP rank manifest: lines of 'rank host:port'");
  app.add_option("--rank", cfg.rank, "TCP: rank of this process; omit to spawn all ranks locally");
  app.add_option("--width", cfg.width)->check(CLI::PositiveNumber);
  app.add_option("--height", cfg.height)->check(CLI::PositiveNumber);
  app.add_option("--tile-size", cfg.tileSize)->check(CLI::PositiveNumber);
  app.add_option("--renderer", renderer, "image, data or mixed");
  app.add_option("--replication", cfg.replication, "Ranks holding each brick (mixed)");
  app.add_option("--frames", cfg.frames)->check(CLI::PositiveNumber);
  app.add_option("--format", format, "rgba8, rgbaf32 or none");
  app.add_option("--compression", compression, "on, off or auto");
  app.add_flag("--baseline", cfg.baseline, "Synchronous direct-send compositing");
  app.add_option("--delay-rank", delays, "R:MS extra render time for rank R (repeatable)");
  app.add_option("--spp", cfg.spp)->check(CLI::PositiveNumber);
  app.add_option("--accum", cfg.accumulationPasses, "Accumulation passes per frame")->check(CLI::PositiveNumber);
  app.add_option("--out", cfg.outPrefix, "Output prefix");
  app.add_option("--seed", cfg.seed);
  app.add_option("--scene", cfg.sceneFile, "Scene JSON file");
  app.add_option("--route", route, "gather or per-tile");
  app.add_option("--threads", cfg.renderThreads, "Render threads per rank (0: auto)");
  app.add_flag("--raw", cfg.writeRaw, "Also write raw display bytes per frame");
  CLI11_PARSE(app, argc, argv);

  try {
    cfg.renderer = dfb::parseRendererKind(renderer);
    cfg.format = dfb::parseColorFormat(format);
    cfg.compression = dfb::parseCompressionPolicy(compression);
    if (route == "gather") cfg.route = dfb::FinalPixelRoute::Gather;
    else if (route == "per-tile") cfg.route = dfb::FinalPixelRoute::PerTileSends;
    else throw dfb::ConfigError("--route must be gather or per-tile");
    for (const auto& d : delays) cfg.delays.push_back(parseDelay(d));

    if (cfg.transport == "tcp") {
      if (cfg.manifest.empty()) throw dfb::ConfigError("--transport tcp requires --manifest");
      cfg.numRanks = static_cast<int>(dfb::loadManifest(cfg.manifest).size());
      if (cfg.rank < 0) {
        cfg.validate();
        return spawnRanks(argc, argv, cfg.numRanks);
      }
    }

    const auto result = dfb::runBenchmark(cfg);
    if (cfg.transport == "inproc" || cfg.rank == 0) {
      std::printf("frames %zu  median %.6f s  MAD %.6f s  median overhead %.6f s\n", result.frameSeconds.size(),
                  result.summary.medianFrameSeconds, result.summary.madFrameSeconds,
                  result.summary.medianOverheadSeconds);
    }
    return 0;
  } catch (const dfb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
