// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "skillassess/error.hpp"
#include "skillassess/generator.hpp"
#include "skillassess/kernels.hpp"

namespace skillassess {

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> kSpecial{"<pad>", "<unk>", "<bos>", "<eos>",
                                                 std::string(kVideoPlaceholder)};
  return kSpecial;
}

bool is_split_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) && c != '\'' && c != '-' && c != '_';
}

bool attaches_left(std::string_view tok) {
  return tok.size() == 1 && (tok[0] == '.' || tok[0] == ',' || tok[0] == ';' || tok[0] == ':' ||
                             tok[0] == '!' || tok[0] == '?' || tok[0] == ')');
}

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> words) {
  std::set<std::string> uniq(words.begin(), words.end());
  for (const auto& s : special_tokens()) uniq.erase(s);
  vocab_ = special_tokens();
  vocab_.insert(vocab_.end(), uniq.begin(), uniq.end());
}

Tokenizer Tokenizer::from_texts(const std::vector<std::string>& texts) {
  std::vector<std::string> words;
  for (const auto& t : texts) {
    auto w = split_words(t);
    words.insert(words.end(), w.begin(), w.end());
  }
  return Tokenizer(std::move(words));
}

std::vector<std::string> Tokenizer::split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (text.substr(i, kVideoPlaceholder.size()) == kVideoPlaceholder) {
      flush();
      out.emplace_back(kVideoPlaceholder);
      i += kVideoPlaceholder.size() - 1;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

int Tokenizer::id_of(std::string_view word) const {
  auto it = std::lower_bound(vocab_.begin() + kNumSpecial, vocab_.end(), word);
  if (it != vocab_.end() && *it == word) return static_cast<int>(it - vocab_.begin());
  for (int i = 0; i < kNumSpecial; ++i) {
    if (vocab_[i] == word) return i;
  }
  return kUnk;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos || id == kVideo) continue;
    const std::string& tok = (id >= 0 && static_cast<std::size_t>(id) < vocab_.size()) ? vocab_[id] : vocab_[kUnk];
    if (!out.empty() && !attaches_left(tok)) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::vector<std::string> Tokenizer::words() const {
  return {vocab_.begin() + kNumSpecial, vocab_.end()};
}

// ---------------------------------------------------------------------------
// ToyDecoder internals

namespace {

struct AdaptedLinear {
  std::string name;
  Matrix w;                   // in x out, frozen
  std::vector<double> bias;   // out, frozen; empty when absent
  bool adapted = false;
  double scale = 0.0;
  Matrix a, b;                // in x r, r x out
  Matrix ga, gb;
  AdamState sa, sb;
};

struct LinearCache {
  Matrix xd;   // input after dropout mask
  Matrix xda;  // xd * a
  Matrix mask;
};

Matrix linear_forward(const AdaptedLinear& L, const Matrix& x, LinearCache* cache, double dropout,
                      Rng* rng) {
  Matrix y = matmul(x, L.w);
  if (!L.bias.empty()) add_row_vector(y, L.bias);
  if (!L.adapted) return y;
  Matrix xd = x;
  Matrix mask;
  if (dropout > 0.0 && rng) {
    const double keep = 1.0 - dropout;
    mask = Matrix(x.rows(), x.cols());
    for (auto& m : mask.data()) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
    kernels::mul_inplace(mask.data(), xd.data());
  }
  Matrix xda = matmul(xd, L.a);
  accumulate_nn(y, xda, L.b, L.scale);
  if (cache) {
    cache->xd = std::move(xd);
    cache->xda = std::move(xda);
    cache->mask = std::move(mask);
  }
  return y;
}

Matrix linear_backward(AdaptedLinear& L, const LinearCache& c, const Matrix& dy) {
  Matrix dx = matmul_nt(dy, L.w);
  if (!L.adapted) return dx;
  accumulate_tn(L.gb, c.xda, dy, L.scale);
  Matrix dxda = matmul_nt(dy, L.b);
  accumulate_tn(L.ga, c.xd, dxda, L.scale);
  Matrix dxd = matmul_nt(dxda, L.a);
  if (!c.mask.empty()) kernels::mul_inplace(c.mask.data(), dxd.data());
  add_inplace(dx, dxd, L.scale);
  return dx;
}

constexpr double kRmsEps = 1e-6;

Matrix rms_forward(const Matrix& x, std::vector<double>& inv) {
  Matrix y = x;
  inv.resize(x.rows());
  const double d = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    inv[r] = 1.0 / std::sqrt(kernels::sum_squares(x.row(r)) / d + kRmsEps);
    for (auto& v : y.row(r)) v *= inv[r];
  }
  return y;
}

Matrix rms_backward(const Matrix& y, const std::vector<double>& inv, const Matrix& dy) {
  Matrix dx(dy.rows(), dy.cols());
  const double d = static_cast<double>(dy.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const double m = kernels::dot(dy.row(r), y.row(r)) / d;
    auto out = dx.row(r);
    const auto yr = y.row(r);
    const auto g = dy.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (g[c] - yr[c] * m) * inv[r];
  }
  return dx;
}

struct AttentionCache {
  std::vector<Matrix> probs;  // per head, n x n (lower triangle used)
};

Matrix attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                         AttentionCache* cache) {
  const std::size_t n = q.rows(), d = q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(n, d);
  if (cache) cache->probs.assign(heads, Matrix(n, n));
  std::vector<double> p(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < n; ++i) {
      const auto qi = q.row(i).subspan(off, dh);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] = kernels::dot(qi, k.row(j).subspan(off, dh)) * scale;
        mx = std::max(mx, p[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - mx);
        z += p[j];
      }
      auto oi = out.row(i).subspan(off, dh);
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] /= z;
        kernels::axpy(p[j], v.row(j).subspan(off, dh), oi);
        if (cache) cache->probs[h](i, j) = p[j];
      }
    }
  }
  return out;
}

void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                        const AttentionCache& cache, const Matrix& dout, Matrix& dq, Matrix& dk,
                        Matrix& dv) {
  const std::size_t n = q.rows(), d = q.cols(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix(n, d);
  dk = Matrix(n, d);
  dv = Matrix(n, d);
  std::vector<double> dp(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix& P = cache.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      const auto doi = dout.row(i).subspan(off, dh);
      double rowdot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        dp[j] = kernels::dot(doi, v.row(j).subspan(off, dh));
        rowdot += P(i, j) * dp[j];
        kernels::axpy(P(i, j), doi, dv.row(j).subspan(off, dh));
      }
      auto dqi = dq.row(i).subspan(off, dh);
      const auto qi = q.row(i).subspan(off, dh);
      for (std::size_t j = 0; j <= i; ++j) {
        const double ds = P(i, j) * (dp[j] - rowdot) * scale;
        if (ds == 0.0) continue;
        kernels::axpy(ds, k.row(j).subspan(off, dh), dqi);
        kernels::axpy(ds, qi, dk.row(j).subspan(off, dh));
      }
    }
  }
}

struct Layer {
  AdaptedLinear q, k, v, o, ff1, ff2;
};

struct LayerCache {
  Matrix a;
  std::vector<double> inv_a;
  LinearCache cq, ck, cv, co, cff1, cff2;
  Matrix q, k, v, attn;
  AttentionCache att;
  Matrix b;
  std::vector<double> inv_b;
  Matrix pre, act;
};

void init_linear(AdaptedLinear& L, std::string name, std::size_t in, std::size_t out, bool bias,
                 bool adapted, const ToyDecoderConfig& cfg, Rng& base_rng) {
  L.name = std::move(name);
  L.w = Matrix(in, out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& x : L.w.data()) x = s * base_rng.normal();
  if (bias) L.bias.assign(out, 0.0);
  L.adapted = adapted;
  if (adapted) {
    const std::size_t r = std::max<std::size_t>(1, std::min({cfg.lora_rank, in, out}));
    L.scale = cfg.lora_alpha / static_cast<double>(cfg.lora_rank);
    L.a = Matrix(in, r);
    L.b = Matrix(r, out);
    L.ga = Matrix(in, r);
    L.gb = Matrix(r, out);
  }
}

struct DecoderWeights {
  Matrix embed;  // V x d
  Matrix pos;    // max_len x d
  std::vector<Layer> layers;
  AdaptedLinear head;

  std::vector<AdaptedLinear*> linears() {
    std::vector<AdaptedLinear*> out;
    for (auto& l : layers) {
      for (auto* p : {&l.q, &l.k, &l.v, &l.o, &l.ff1, &l.ff2}) out.push_back(p);
    }
    out.push_back(&head);
    return out;
  }
  std::vector<const AdaptedLinear*> linears() const {
    std::vector<const AdaptedLinear*> out;
    for (const auto& l : layers) {
      for (const auto* p : {&l.q, &l.k, &l.v, &l.o, &l.ff1, &l.ff2}) out.push_back(p);
    }
    out.push_back(&head);
    return out;
  }
};

// Input slots: token id (>= 0) or visual row r encoded as -(r + 1).
std::vector<int> build_slots(const std::vector<int>& prompt_ids, std::size_t visual_rows) {
  std::vector<int> slots;
  const bool has_placeholder =
      std::find(prompt_ids.begin(), prompt_ids.end(), Tokenizer::kVideo) != prompt_ids.end();
  auto push_visual = [&] {
    for (std::size_t r = 0; r < visual_rows; ++r) slots.push_back(-static_cast<int>(r) - 1);
  };
  if (!has_placeholder) push_visual();
  bool placed = false;
  for (int id : prompt_ids) {
    if (id == Tokenizer::kVideo && !placed) {
      push_visual();
      placed = true;
    } else if (id != Tokenizer::kVideo) {
      slots.push_back(id);
    }
  }
  return slots;
}

Matrix embed_slots(const DecoderWeights& m, const std::vector<int>& slots, const Matrix& visual) {
  const std::size_t d = m.embed.cols();
  if (slots.size() > m.pos.rows()) {
    throw ArgumentError("toy decoder: sequence length " + std::to_string(slots.size()) +
                        " exceeds max_len " + std::to_string(m.pos.rows()));
  }
  Matrix x(slots.size(), d);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto row = x.row(i);
    const int s = slots[i];
    const auto src = s >= 0 ? m.embed.row(static_cast<std::size_t>(s)) : visual.row(static_cast<std::size_t>(-s - 1));
    std::copy(src.begin(), src.end(), row.begin());
    kernels::axpy(1.0, m.pos.row(i), row);
  }
  return x;
}

// Runs the blocks; returns the final residual stream.
Matrix run_layers(const DecoderWeights& m, Matrix x, std::size_t heads, std::vector<LayerCache>* caches,
                  double dropout, Rng* rng) {
  if (caches) caches->resize(m.layers.size());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& L = m.layers[li];
    LayerCache local;
    LayerCache& c = caches ? (*caches)[li] : local;
    c.a = rms_forward(x, c.inv_a);
    c.q = linear_forward(L.q, c.a, &c.cq, dropout, rng);
    c.k = linear_forward(L.k, c.a, &c.ck, dropout, rng);
    c.v = linear_forward(L.v, c.a, &c.cv, dropout, rng);
    c.attn = attention_forward(c.q, c.k, c.v, heads, caches ? &c.att : nullptr);
    add_inplace(x, linear_forward(L.o, c.attn, &c.co, dropout, rng));
    c.b = rms_forward(x, c.inv_b);
    c.pre = linear_forward(L.ff1, c.b, &c.cff1, dropout, rng);
    c.act = c.pre;
    for (auto& v : c.act.data()) v = gelu(v);
    add_inplace(x, linear_forward(L.ff2, c.act, &c.cff2, dropout, rng));
  }
  return x;
}

Matrix gather_rows(const Matrix& x, std::size_t first, std::size_t count) {
  Matrix out(count, x.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(x.row(first + i).begin(), x.row(first + i).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

struct ToyDecoder::Impl : DecoderWeights {
  Rng dropout_rng{0};
  std::size_t accumulated = 0;
};

ToyDecoder::ToyDecoder(Tokenizer tokenizer, ToyDecoderConfig config)
    : tokenizer_(std::move(tokenizer)), config_(config), impl_(std::make_unique<Impl>()) {
  const std::size_t d = config_.embed_dim;
  if (d == 0 || config_.n_heads == 0 || d % config_.n_heads != 0) {
    throw ConfigError("toy decoder: embed_dim must be a positive multiple of n_heads");
  }
  if (config_.lora_rank == 0) throw ConfigError("toy decoder: lora_rank must be >= 1");
  if (!(config_.lora_dropout >= 0.0 && config_.lora_dropout < 1.0)) {
    throw ConfigError("toy decoder: lora_dropout must be in [0, 1)");
  }
  Rng base(config_.base_seed);
  const std::size_t V = tokenizer_.size();
  impl_->embed = Matrix(V, d);
  for (auto& x : impl_->embed.data()) x = base.normal();
  impl_->pos = Matrix(config_.max_len, d);
  for (auto& x : impl_->pos.data()) x = 0.5 * base.normal();
  const std::size_t ff = d * config_.ff_mult;
  impl_->layers.resize(config_.n_layers);
  for (std::size_t li = 0; li < config_.n_layers; ++li) {
    auto& L = impl_->layers[li];
    const std::string p = "layer" + std::to_string(li) + ".";
    init_linear(L.q, p + "q", d, d, false, config_.adapt_attention, config_, base);
    init_linear(L.k, p + "k", d, d, false, config_.adapt_attention, config_, base);
    init_linear(L.v, p + "v", d, d, false, config_.adapt_attention, config_, base);
    init_linear(L.o, p + "o", d, d, false, config_.adapt_attention, config_, base);
    init_linear(L.ff1, p + "ff1", d, ff, true, config_.adapt_mlp, config_, base);
    init_linear(L.ff2, p + "ff2", ff, d, true, config_.adapt_mlp, config_, base);
  }
  init_linear(impl_->head, "head", d, V, true, config_.adapt_head, config_, base);
  reset_adapters();
}

ToyDecoder::~ToyDecoder() = default;

ToyDecoder::ToyDecoder(const ToyDecoder& other)
    : tokenizer_(other.tokenizer_),
      config_(other.config_),
      training_(other.training_),
      impl_(std::make_unique<Impl>(*other.impl_)) {}

std::unique_ptr<GeneratorBackend> ToyDecoder::clone() const {
  return std::make_unique<ToyDecoder>(*this);
}

std::string ToyDecoder::backend_id() const {
  return "toy:d" + std::to_string(config_.embed_dim) + ":l" + std::to_string(config_.n_layers) + ":h" +
         std::to_string(config_.n_heads) + ":v" + sha256_hex(join(tokenizer_.vocab(), "\n")).substr(0, 12) +
         ":s" + std::to_string(config_.base_seed);
}

void ToyDecoder::reset_adapters() {
  Rng rng(config_.adapter_seed ^ 0x5eedULL);
  for (auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    const double s = 1.0 / std::sqrt(static_cast<double>(L->a.rows()));
    for (auto& x : L->a.data()) x = s * rng.normal();
    L->b.fill(0.0);
    L->ga.fill(0.0);
    L->gb.fill(0.0);
    L->sa = {};
    L->sb = {};
  }
  impl_->dropout_rng = Rng(config_.adapter_seed ^ 0xd209ULL);
  impl_->accumulated = 0;
}

LossAndGrad ToyDecoder::forward_backward(const Matrix& visual, std::string_view prompt,
                                         std::string_view target) {
  if (!visual.empty() && visual.cols() != config_.embed_dim) {
    throw ShapeError("toy decoder: visual rows have " + std::to_string(visual.cols()) +
                     " columns, expected " + std::to_string(config_.embed_dim));
  }
  Impl& m = *impl_;
  auto slots = build_slots(tokenizer_.encode(prompt), visual.rows());
  const std::size_t prefix = slots.size();
  const auto target_ids = tokenizer_.encode(target);
  for (int t : target_ids) slots.push_back(t);
  std::vector<int> labels(target_ids.begin(), target_ids.end());
  labels.push_back(Tokenizer::kEos);
  if (prefix == 0) throw ArgumentError("toy decoder: empty prompt");

  const double dropout = training_ ? config_.lora_dropout : 0.0;
  Rng* rng = training_ ? &m.dropout_rng : nullptr;
  const Matrix x0 = embed_slots(m, slots, visual);
  std::vector<LayerCache> caches;
  Matrix x = run_layers(m, x0, config_.n_heads, &caches, dropout, rng);

  const std::size_t first = prefix - 1;
  const std::size_t count = labels.size();
  std::vector<double> inv_z;
  const Matrix z = rms_forward(gather_rows(x, first, count), inv_z);
  LinearCache head_cache;
  Matrix logits = linear_forward(m.head, z, &head_cache, dropout, rng);

  double loss = 0.0;
  Matrix dlogits(count, logits.cols());
  for (std::size_t i = 0; i < count; ++i) {
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double zsum = 0.0;
    for (double v : row) zsum += std::exp(v - mx);
    const double lse = mx + std::log(zsum);
    loss -= row[labels[i]] - lse;
    auto g = dlogits.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = std::exp(row[c] - lse) / static_cast<double>(count);
    g[labels[i]] -= 1.0 / static_cast<double>(count);
  }
  loss /= static_cast<double>(count);
  if (!std::isfinite(loss)) throw NumericError("toy decoder: non-finite loss");

  const Matrix dz = linear_backward(m.head, head_cache, dlogits);
  const Matrix dxs = rms_backward(z, inv_z, dz);
  Matrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(dxs.row(i).begin(), dxs.row(i).end(), dx.row(first + i).begin());
  }

  for (std::size_t li = m.layers.size(); li-- > 0;) {
    Layer& L = m.layers[li];
    LayerCache& c = caches[li];
    // MLP branch
    Matrix dact = linear_backward(L.ff2, c.cff2, dx);
    for (std::size_t i = 0; i < dact.size(); ++i) dact.data()[i] *= gelu_grad(c.pre.data()[i]);
    const Matrix db = linear_backward(L.ff1, c.cff1, dact);
    add_inplace(dx, rms_backward(c.b, c.inv_b, db));
    // attention branch
    const Matrix dattn = linear_backward(L.o, c.co, dx);
    Matrix dq, dk, dv;
    attention_backward(c.q, c.k, c.v, config_.n_heads, c.att, dattn, dq, dk, dv);
    Matrix da = linear_backward(L.q, c.cq, dq);
    add_inplace(da, linear_backward(L.k, c.ck, dk));
    add_inplace(da, linear_backward(L.v, c.cv, dv));
    add_inplace(dx, rms_backward(c.a, c.inv_a, da));
  }

  LossAndGrad out;
  out.loss = loss;
  out.visual_grad = Matrix(visual.rows(), visual.cols());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] < 0) {
      const auto r = static_cast<std::size_t>(-slots[i] - 1);
      std::copy(dx.row(i).begin(), dx.row(i).end(), out.visual_grad.row(r).begin());
    }
  }
  ++m.accumulated;
  return out;
}

double ToyDecoder::loss(const Matrix& visual, std::string_view prompt, std::string_view target) const {
  const Impl& m = *impl_;
  auto slots = build_slots(tokenizer_.encode(prompt), visual.rows());
  const std::size_t prefix = slots.size();
  const auto target_ids = tokenizer_.encode(target);
  for (int t : target_ids) slots.push_back(t);
  std::vector<int> labels(target_ids.begin(), target_ids.end());
  labels.push_back(Tokenizer::kEos);
  const Matrix x = run_layers(m, embed_slots(m, slots, visual), config_.n_heads, nullptr, 0.0, nullptr);
  std::vector<double> inv;
  const Matrix z = rms_forward(gather_rows(x, prefix - 1, labels.size()), inv);
  const Matrix logits = linear_forward(m.head, z, nullptr, 0.0, nullptr);
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double zsum = 0.0;
    for (double v : row) zsum += std::exp(v - mx);
    loss -= row[labels[i]] - (mx + std::log(zsum));
  }
  return loss / static_cast<double>(labels.size());
}

void ToyDecoder::apply_adapter_update(double lr) {
  Impl& m = *impl_;
  if (m.accumulated == 0) return;
  const double inv = 1.0 / static_cast<double>(m.accumulated);
  for (auto* L : m.linears()) {
    if (!L->adapted) continue;
    for (auto& g : L->ga.data()) g *= inv;
    for (auto& g : L->gb.data()) g *= inv;
    adam_update(L->a.data(), L->ga.data(), L->sa, lr);
    adam_update(L->b.data(), L->gb.data(), L->sb, lr);
  }
  zero_adapter_grads();
}

void ToyDecoder::zero_adapter_grads() {
  for (auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    L->ga.fill(0.0);
    L->gb.fill(0.0);
  }
  impl_->accumulated = 0;
}

std::string ToyDecoder::generate(const Matrix& visual, std::string_view prompt, std::size_t max_tokens) const {
  if (!visual.empty() && visual.cols() != config_.embed_dim) {
    throw ShapeError("toy decoder: visual rows have wrong width");
  }
  const Impl& m = *impl_;
  auto slots = build_slots(tokenizer_.encode(prompt), visual.rows());
  std::vector<int> out;
  for (std::size_t step = 0; step < max_tokens; ++step) {
    if (slots.size() >= m.pos.rows()) break;
    const Matrix x = run_layers(m, embed_slots(m, slots, visual), config_.n_heads, nullptr, 0.0, nullptr);
    std::vector<double> inv;
    const Matrix z = rms_forward(gather_rows(x, slots.size() - 1, 1), inv);
    const Matrix logits = linear_forward(m.head, z, nullptr, 0.0, nullptr);
    auto row = logits.row(0);
    int best = Tokenizer::kEos;
    double best_v = row[Tokenizer::kEos];
    for (std::size_t c = Tokenizer::kNumSpecial; c < row.size(); ++c) {
      if (row[c] > best_v) {
        best_v = row[c];
        best = static_cast<int>(c);
      }
    }
    if (best == Tokenizer::kEos) break;
    out.push_back(best);
    slots.push_back(best);
  }
  return tokenizer_.decode(out);
}

nlohmann::json ToyDecoder::save_adapters() const {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    tensors[L->name] = {{"in", L->a.rows()}, {"rank", L->a.cols()}, {"out", L->b.cols()},
                        {"a", L->a.data()},  {"b", L->b.data()}};
  }
  return nlohmann::json{{"backend_id", backend_id()},
                        {"embed_dim", config_.embed_dim},
                        {"base_fingerprint", base_fingerprint()},
                        {"tensors", tensors}};
}

void ToyDecoder::load_adapters(const nlohmann::json& state) {
  if (state.at("embed_dim").get<std::size_t>() != config_.embed_dim) {
    throw ConfigError("adapter state embed_dim " + state.at("embed_dim").dump() +
                      " does not match generator embed_dim " + std::to_string(config_.embed_dim));
  }
  if (state.at("backend_id").get<std::string>() != backend_id()) {
    throw ConfigError("adapter state was saved for " + state.at("backend_id").get<std::string>() +
                      ", not " + backend_id());
  }
  const auto& tensors = state.at("tensors");
  for (auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    if (!tensors.contains(L->name)) throw ConfigError("adapter state lacks tensor " + L->name);
    const auto& t = tensors.at(L->name);
    auto a = t.at("a").get<std::vector<double>>();
    auto b = t.at("b").get<std::vector<double>>();
    if (a.size() != L->a.size() || b.size() != L->b.size()) {
      throw ShapeError("adapter tensor " + L->name + " has the wrong shape");
    }
    L->a.data() = std::move(a);
    L->b.data() = std::move(b);
    L->sa = {};
    L->sb = {};
  }
  zero_adapter_grads();
}

std::size_t ToyDecoder::adapter_parameter_count() const {
  std::size_t n = 0;
  for (const auto* L : impl_->linears()) {
    if (L->adapted) n += L->a.size() + L->b.size();
  }
  return n;
}

std::string ToyDecoder::base_fingerprint() const {
  std::string bytes;
  auto add = [&](const std::vector<double>& v) {
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  };
  add(impl_->embed.data());
  add(impl_->pos.data());
  for (const auto* L : impl_->linears()) {
    add(L->w.data());
    add(L->bias);
  }
  return sha256_hex(bytes);
}

std::vector<std::span<double>> ToyDecoder::adapter_tensors() {
  std::vector<std::span<double>> out;
  for (auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    out.emplace_back(L->a.data());
    out.emplace_back(L->b.data());
  }
  return out;
}

std::vector<std::span<const double>> ToyDecoder::adapter_gradients() const {
  std::vector<std::span<const double>> out;
  for (const auto* L : impl_->linears()) {
    if (!L->adapted) continue;
    out.emplace_back(L->ga.data());
    out.emplace_back(L->gb.data());
  }
  return out;
}

}  // namespace skillassess
