#include "dfb/scene.hpp"

#include "dfb/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dfb {

int SceneConfig::brickCount() const {
  return boundsOverride.empty() ? brickGrid.prod() : static_cast<int>(boundsOverride.size());
}

Box3f SceneConfig::volumeBounds() const { return {Vec3f::Zero(), volumeDims.cast<float>()}; }

std::vector<Box3f> SceneConfig::brickBounds() const {
  if (!boundsOverride.empty()) return boundsOverride;
  std::vector<Box3f> out;
  auto split = [&](int axis, int i) {
    return static_cast<float>(static_cast<long long>(i) * volumeDims[axis] / brickGrid[axis]);
  };
  for (int z = 0; z < brickGrid.z(); ++z)
    for (int y = 0; y < brickGrid.y(); ++y)
      for (int x = 0; x < brickGrid.x(); ++x)
        out.emplace_back(Vec3f(split(0, x), split(1, y), split(2, z)),
                         Vec3f(split(0, x + 1), split(1, y + 1), split(2, z + 1)));
  return out;
}

std::vector<std::vector<int>> SceneConfig::shareLists(int numRanks) const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(brickCount()));
  for (int b = 0; b < brickCount(); ++b) {
    for (int j = 0; j < replication; ++j) out[static_cast<std::size_t>(b)].push_back((b * replication + j) % numRanks);
    std::sort(out[static_cast<std::size_t>(b)].begin(), out[static_cast<std::size_t>(b)].end());
  }
  return out;
}

std::vector<int> SceneConfig::bricksOfRank(int rank, int numRanks) const {
  std::vector<int> out;
  const auto lists = shareLists(numRanks);
  for (std::size_t b = 0; b < lists.size(); ++b)
    if (std::binary_search(lists[b].begin(), lists[b].end(), rank)) out.push_back(static_cast<int>(b));
  return out;
}

void SceneConfig::validate(int numRanks) const {
  if ((volumeDims.array() < 1).any()) throw ConfigError("volume dimensions must be positive");
  if ((brickGrid.array() < 1).any()) throw ConfigError("brick grid must be positive");
  if ((brickGrid.array() > volumeDims.array()).any()) throw ConfigError("more bricks than voxels along an axis");
  if (replication < 1 || replication > numRanks) throw ConfigError("replication must be in [1, numRanks]");
  if (static_cast<long long>(brickCount()) * replication < numRanks)
    throw ConfigError("bricks x replication must cover every rank");
  if (samplesPerPixel < 1) throw ConfigError("samples per pixel must be >= 1");
  if (!(sampling.step > 0.0f) || !(sampling.unitStep > 0.0f)) throw ConfigError("step sizes must be positive");
  for (const auto& b : brickBounds())
    if (b.empty()) throw ConfigError("empty brick bounds");
}

std::vector<Brick> SceneConfig::loadBricks(int rank, int numRanks) const {
  const auto bounds = brickBounds();
  std::vector<Brick> out;
  for (int id : bricksOfRank(rank, numRanks)) out.emplace_back(id, bounds[static_cast<std::size_t>(id)], volumeDims);
  return out;
}

Eigen::Vector4f SceneConfig::premultipliedBackground() const {
  return {background[0] * background[3], background[1] * background[3], background[2] * background[3],
          background[3]};
}

Eigen::Vector3i defaultBrickGrid(int n) {
  if (n < 1) throw ConfigError("brick count must be positive");
  Eigen::Vector3i grid(1, 1, 1);
  int axis = 0;
  for (int rest = n, f = 2; rest > 1;) {
    while (rest % f != 0) ++f;
    rest /= f;
    grid[axis] *= f;
    axis = (axis + 1) % 3;
  }
  std::sort(grid.data(), grid.data() + 3, std::greater<>());
  return grid;
}

namespace {

Eigen::Vector3i vec3i(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected an array of 3 integers");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Eigen::Vector4f vec4f(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("expected an array of 4 numbers");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>(), j[3].get<float>()};
}

}  // namespace

SceneConfig parseScene(const std::string& text) {
  SceneConfig s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("volume_dims")) s.volumeDims = vec3i(j["volume_dims"]);
    if (j.contains("brick_grid")) s.brickGrid = vec3i(j["brick_grid"]);
    if (j.contains("replication")) s.replication = j["replication"].get<int>();
    if (j.contains("background")) s.background = vec4f(j["background"]);
    if (j.contains("spp")) s.samplesPerPixel = j["spp"].get<int>();
    if (j.contains("step")) s.sampling.step = j["step"].get<float>();
    if (j.contains("unit_step")) s.sampling.unitStep = j["unit_step"].get<float>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("transfer_function")) {
      const auto& tf = j["transfer_function"];
      const auto range = tf.value("range", std::vector<float>{0.0f, 1.0f});
      if (range.size() != 2) throw ConfigError("transfer_function.range needs 2 numbers");
      std::vector<ControlPoint> points;
      for (const auto& p : tf.at("points")) {
        if (!p.is_array() || p.size() != 5) throw ConfigError("control point must be [position, r, g, b, a]");
        points.push_back({p[0].get<float>(), {p[1].get<float>(), p[2].get<float>(), p[3].get<float>(), p[4].get<float>()}});
      }
      s.transferFunction = TransferFunction(range[0], range[1], std::move(points));
    }
    if (j.contains("bricks")) {
      for (const auto& b : j["bricks"]) {
        const int id = b.at("id").get<int>();
        const auto lo = b.at("lower").get<std::vector<float>>();
        const auto hi = b.at("upper").get<std::vector<float>>();
        if (lo.size() != 3 || hi.size() != 3) throw ConfigError("brick bounds need 3 components");
        if (id < 0) throw ConfigError("brick id must be non-negative");
        if (s.boundsOverride.size() <= static_cast<std::size_t>(id)) s.boundsOverride.resize(static_cast<std::size_t>(id) + 1);
        s.boundsOverride[static_cast<std::size_t>(id)] = Box3f(Vec3f(lo[0], lo[1], lo[2]), Vec3f(hi[0], hi[1], hi[2]));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene file: ") + e.what());
  }
  return s;
}

SceneConfig loadSceneFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScene(ss.str());
}

}  // namespace dfb
