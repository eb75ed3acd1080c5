// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/features.hpp"

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "skillassess/error.hpp"

namespace skillassess {

std::size_t frame_count(double start_s, double end_s) {
  const double len = end_s - start_s;
  if (!(len > 0.0)) return 0;
  // Guard against representation noise such as 8.000000000001.
  return static_cast<std::size_t>(std::ceil(len - 1e-9));
}

std::vector<double> frame_anchors(double start_s, double end_s) {
  const std::size_t n = frame_count(start_s, end_s);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = start_s + static_cast<double>(i);
  if (n > 0) out[n - 1] = std::max(start_s, std::min(out[n - 1], end_s - 1.0));
  return out;
}

SyntheticEncoder::SyntheticEncoder(SyntheticEncoderOptions options, std::vector<PlantedEvent> events)
    : options_(options) {
  if (!(options_.signal_strength >= 0.0 && options_.signal_strength <= 1.0)) {
    throw ArgumentError("synthetic encoder: signal_strength must be in [0, 1]");
  }
  if (options_.feature_dim == 0) throw ArgumentError("synthetic encoder: feature_dim must be > 0");
  for (auto& e : events) events_[e.video_id].push_back(std::move(e));
  std::string blob;
  for (const auto& [video, list] : events_) {
    for (const auto& e : list) {
      blob += video + '\x1f' + format_fixed(e.timestamp_s, 3) + '\x1f' + join({e.attributes.begin(), e.attributes.end()}, "\x1e") +
              '\x1f' + (e.proficiency ? std::string(to_string(*e.proficiency)) : std::string()) + '\n';
    }
  }
  events_digest_ = sha256_hex(blob).substr(0, 12);
}

std::string SyntheticEncoder::backend_id() const {
  return "synthetic:s" + std::to_string(options_.seed) + ":g" + format_fixed(options_.signal_strength, 3) +
         ":d" + std::to_string(options_.feature_dim) + ":n" + format_fixed(options_.noise_scale, 3) + ":e" + events_digest_;
}

std::vector<double> SyntheticEncoder::direction(std::string_view name, std::string_view view_id) const {
  std::string key(name);
  key.push_back('\x1f');
  key.append(view_id);
  Rng rng(fnv1a64(key, options_.seed));
  std::vector<double> d(options_.feature_dim);
  for (auto& x : d) x = rng.normal();
  return d;
}

Matrix SyntheticEncoder::encode(const std::string& video_id, const std::string& view_id,
                                double start_s, double end_s) const {
  const auto anchors = frame_anchors(start_s, end_s);
  Matrix out(anchors.size(), options_.feature_dim);
  const auto ev = events_.find(video_id);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    auto row = out.row(i);
    Rng noise(fnv1a64(video_id + '\x1f' + view_id + '\x1f' + format_fixed(anchors[i], 3), options_.seed));
    for (auto& x : row) x = options_.noise_scale * noise.normal();
    if (ev == events_.end() || options_.signal_strength == 0.0) continue;
    for (const auto& e : ev->second) {
      if (std::abs(anchors[i] - e.timestamp_s) > options_.event_radius_s) continue;
      for (const auto& a : e.attributes) {
        const auto d = direction(a, view_id);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += options_.signal_strength * d[k];
      }
      if (e.proficiency) {
        const auto d = direction("proficiency:" + std::string(to_string(*e.proficiency)), view_id);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += options_.signal_strength * d[k];
      }
    }
  }
  return out;
}

std::unique_ptr<SyntheticEncoder> synthetic_encoder(std::uint64_t seed, double signal_strength,
                                                    std::vector<PlantedEvent> events,
                                                    std::size_t feature_dim) {
  SyntheticEncoderOptions o;
  o.seed = seed;
  o.signal_strength = signal_strength;
  o.feature_dim = feature_dim;
  return std::make_unique<SyntheticEncoder>(o, std::move(events));
}

FeatureSequence encode_clip(const ClipSample& sample, const EncoderBackend& backend) {
  const std::size_t rows = frame_count(sample.window_start_s, sample.window_end_s);
  const std::size_t n = backend.feature_dim();
  FeatureSequence seq;
  seq.sample_id = sample.sample_id;
  seq.frames = Matrix(rows, n * sample.views.size());
  for (std::size_t v = 0; v < sample.views.size(); ++v) {
    const auto& view = sample.views[v];
    Matrix block = backend.encode(sample.video_id, view, sample.window_start_s, sample.window_end_s);
    if (block.rows() != rows || block.cols() != n) {
      throw EncodingError("encoder returned wrong shape for view '" + view + "'");
    }
    if (!block.all_finite()) throw NumericError("non-finite feature in view '" + view + "'");
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(block.row(r).begin(), block.row(r).end(), seq.frames.row(r).begin() + v * n);
    }
    seq.view_layout.push_back({view, n});
  }
  return seq;
}

FeatureCache::FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FeatureCache::blob_path(const std::string& sample_id,
                                              const std::string& backend_id) const {
  return dir_ / (sha256_hex(backend_id + '\x1f' + sample_id).substr(0, 32) + ".f32");
}

std::string FeatureCache::encode_blob(const Matrix& m) {
  std::string out(m.size() * 4, '\0');
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i]));
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

Matrix FeatureCache::decode_blob(std::string_view bytes, std::size_t rows, std::size_t cols) {
  if (bytes.size() != rows * cols * 4) throw EncodingError("feature blob has wrong size");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    m.data()[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return m;
}

std::filesystem::path FeatureCache::put(const FeatureSequence& seq, const std::string& backend_id) {
  const auto path = blob_path(seq.sample_id, backend_id);
  const std::string blob = encode_blob(seq.frames);
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& v : seq.view_layout) layout.push_back({{"view_id", v.view_id}, {"dim", v.dim}});
  const nlohmann::json entry{{"sample_id", seq.sample_id},
                             {"rows", seq.frames.rows()},
                             {"cols", seq.frames.cols()},
                             {"dtype", "f32le"},
                             {"backend_id", backend_id},
                             {"file", path.filename().string()},
                             {"checksum", sha256_hex(blob)},
                             {"view_layout", layout}};
  std::lock_guard lock(mu_);
  write_file_atomic(path, blob);
  const std::string line = entry.dump() + "\n";
  const int fd = ::open(manifest_path().c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error("cannot open feature manifest");
  ::flock(fd, LOCK_EX);
  const auto written = ::write(fd, line.data(), line.size());
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size())) throw Error("short write to feature manifest");
  return path;
}

std::optional<FeatureSequence> FeatureCache::get(const std::string& sample_id,
                                                 const std::string& backend_id) const {
  std::lock_guard lock(mu_);
  std::ifstream in(manifest_path());
  if (!in) return std::nullopt;
  std::optional<nlohmann::json> found;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j.at("sample_id") == sample_id && j.at("backend_id") == backend_id) found = std::move(j);
  }
  if (!found) return std::nullopt;
  const auto bytes = read_file(dir_ / found->at("file").get<std::string>());
  if (sha256_hex(bytes) != found->at("checksum").get<std::string>()) {
    throw EncodingError("feature blob checksum mismatch for sample " + sample_id);
  }
  FeatureSequence seq;
  seq.sample_id = sample_id;
  seq.frames = decode_blob(bytes, found->at("rows").get<std::size_t>(), found->at("cols").get<std::size_t>());
  for (const auto& v : found->at("view_layout")) {
    seq.view_layout.push_back({v.at("view_id").get<std::string>(), v.at("dim").get<std::size_t>()});
  }
  return seq;
}

bool MapperParams::all_finite() const {
  auto fin = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  return w1.all_finite() && w2.all_finite() && fin(b1) && fin(b2);
}

MapperParams init_mapper(std::size_t d_in, std::size_t d_out, std::uint64_t seed, std::size_t hidden) {
  if (hidden == 0) hidden = d_out;
  Rng rng(seed);
  MapperParams p;
  p.w1 = Matrix(d_in, hidden);
  p.w2 = Matrix(hidden, d_out);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d_in + hidden));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden + d_out));
  for (auto& x : p.w1.data()) x = s1 * rng.normal();
  for (auto& x : p.w2.data()) x = s2 * rng.normal();
  p.b1.assign(hidden, 0.0);
  p.b2.assign(d_out, 0.0);
  return p;
}

nlohmann::json to_json(const MapperParams& p) {
  return nlohmann::json{{"d_in", p.d_in()}, {"hidden", p.hidden()}, {"d_out", p.d_out()},
                        {"w1", p.w1.data()}, {"b1", p.b1},          {"w2", p.w2.data()},
                        {"b2", p.b2}};
}

MapperParams mapper_from_json(const nlohmann::json& j) {
  MapperParams p;
  const auto d_in = j.at("d_in").get<std::size_t>();
  const auto hidden = j.at("hidden").get<std::size_t>();
  const auto d_out = j.at("d_out").get<std::size_t>();
  p.w1 = Matrix(d_in, hidden);
  p.w2 = Matrix(hidden, d_out);
  p.w1.data() = j.at("w1").get<std::vector<double>>();
  p.w2.data() = j.at("w2").get<std::vector<double>>();
  p.b1 = j.at("b1").get<std::vector<double>>();
  p.b2 = j.at("b2").get<std::vector<double>>();
  if (p.w1.data().size() != d_in * hidden || p.w2.data().size() != hidden * d_out ||
      p.b1.size() != hidden || p.b2.size() != d_out) {
    throw ShapeError("mapper parameters do not match declared shape");
  }
  return p;
}

Matrix map_features(const Matrix& x, const MapperParams& p, MapperActivations* acts) {
  if (x.cols() != p.d_in()) {
    throw ShapeError("map_features: expected " + std::to_string(p.d_in()) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  Matrix pre = matmul(x, p.w1);
  add_row_vector(pre, p.b1);
  Matrix act = pre;
  for (auto& v : act.data()) v = gelu(v);
  Matrix out = matmul(act, p.w2);
  add_row_vector(out, p.b2);
  if (!out.all_finite()) throw NumericError("map_features produced a non-finite value");
  if (acts) {
    acts->input = x;
    acts->pre = std::move(pre);
    acts->act = std::move(act);
  }
  return out;
}

Matrix map_features(const FeatureSequence& v_prime, const MapperParams& params) {
  return map_features(v_prime.frames, params);
}

MapperGrads mapper_backward(const MapperActivations& acts, const MapperParams& p, const Matrix& d_out) {
  MapperGrads g;
  g.w2 = matmul_tn(acts.act, d_out);
  g.b2.assign(p.d_out(), 0.0);
  accumulate_column_sums(g.b2, d_out);
  Matrix d_pre = matmul_nt(d_out, p.w2);
  for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre.data()[i] *= gelu_grad(acts.pre.data()[i]);
  g.w1 = matmul_tn(acts.input, d_pre);
  g.b1.assign(p.hidden(), 0.0);
  accumulate_column_sums(g.b1, d_pre);
  return g;
}

}  // namespace skillassess
