#include "dida/train/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dida/data/artifact.hpp"
#include "dida/error.hpp"
#include "dida/model/augmentation.hpp"

namespace dida {

namespace {

constexpr std::uint64_t kTagInit = 0x494e4954;
constexpr char kMagic[8] = {'D', 'I', 'D', 'A', 'M', 'D', 'L', '1'};

Var select_code(Code c, int d, const EncodedBranch enc[2], const EncodedBranch& aug) {
  switch (c) {
    case Code::kSpecific: return enc[d].z2;
    case Code::kIndependent: return enc[d].z1;
    case Code::kShared: return aug.z1;
    case Code::kOtherIndependent: return enc[1 - d].z1;
  }
  throw ContractError("bad code");
}

// Mean KL of both heads and reconstruction error of one branch.
std::pair<Var, Var> elbo_terms(const EncodedBranch& enc, Var input, Decoder& dec) {
  Tape& t = *input.tape();
  Var kl = add(gaussian_kl(enc.mu[0], enc.log_sigma[0]), gaussian_kl(enc.mu[1], enc.log_sigma[1]));
  Var recon = affine(add(enc.z1, enc.z2), t.parameter(dec.w), t.parameter(dec.b));
  return {kl, mean_squared_error(recon, input)};
}

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("model file truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void Decoder::collect(ParamList& out) {
  out.push_back(&w);
  out.push_back(&b);
}

std::vector<Code> fusion_codes(Variant v) {
  switch (v) {
    case Variant::kBase: return {};
    case Variant::kWoSha: return {Code::kSpecific, Code::kIndependent};
    case Variant::kWoSpe: return {Code::kIndependent, Code::kShared};
    case Variant::kWoInd: return {Code::kSpecific, Code::kShared};
    case Variant::kTransferInd:
      return {Code::kSpecific, Code::kIndependent, Code::kShared, Code::kOtherIndependent};
    default: return {Code::kSpecific, Code::kIndependent, Code::kShared};
  }
}

Model::Model(const RunConfig& config, std::size_t num_users, std::size_t items_a,
             std::size_t items_b)
    : config_(config), num_users_(num_users), num_items_{items_a, items_b} {
  config_.validate();
  if (num_users == 0 || items_a == 0 || items_b == 0) throw ContractError("model: empty domain");
  const std::size_t k = config_.k, width = embedding_width();
  const std::size_t codes = fusion_codes(config_.variant).size();
  const std::size_t user_in = disentangled() ? fused_width(config_.fusion, codes, k) : width;
  Rng rng(config_.seed, {kTagInit});
  for (int d = 0; d < 2; ++d) {
    const std::string p = d == 0 ? "a" : "b";
    DomainModel& dm = domain(d);
    dm.gcn = GcnWeights::init(p + ".gcn", num_users + num_items(d), k, config_.layers, rng);
    if (disentangled()) {
      dm.encoder = DisentangleWeights::init(p + ".enc", width, k, rng);
      dm.fusion = FusionWeights::init(p + ".fusion", config_.fusion, codes, k, rng);
    }
    const std::size_t uw[] = {user_in, 2 * k, k};
    const std::size_t iw[] = {width, 2 * k, k};
    dm.user_tower = Tower::init(p + ".user_tower", uw, rng);
    dm.item_tower = Tower::init(p + ".item_tower", iw, rng);
    if (elbo()) {
      dm.decoder.w = gaussian_parameter(p + ".dec.w", k, width, rng);
      dm.decoder.b = gaussian_parameter(p + ".dec.b", 1, width, rng);
    }
  }
  if (disentangled()) {
    aug_encoder_ = DisentangleWeights::init("aug.enc", width, k, rng);
    classifier_ = DomainClassifier::init(k, rng);
    if (elbo()) {
      aug_decoder_.w = gaussian_parameter("aug.dec.w", k, width, rng);
      aug_decoder_.b = gaussian_parameter("aug.dec.b", 1, width, rng);
    }
  }

  collect_params();
}

Model::Model(const Model& other)
    : config_(other.config_),
      num_users_(other.num_users_),
      num_items_(other.num_items_),
      domains_(other.domains_),
      aug_encoder_(other.aug_encoder_),
      aug_decoder_(other.aug_decoder_),
      classifier_(other.classifier_) {
  collect_params();
}

Model::Model(Model&& other) noexcept
    : config_(std::move(other.config_)),
      num_users_(other.num_users_),
      num_items_(other.num_items_),
      domains_(std::move(other.domains_)),
      aug_encoder_(std::move(other.aug_encoder_)),
      aug_decoder_(std::move(other.aug_decoder_)),
      classifier_(std::move(other.classifier_)) {
  collect_params();
  other.params_.clear();
}

Model& Model::operator=(Model other) noexcept {
  config_ = std::move(other.config_);
  num_users_ = other.num_users_;
  num_items_ = other.num_items_;
  domains_ = std::move(other.domains_);
  aug_encoder_ = std::move(other.aug_encoder_);
  aug_decoder_ = std::move(other.aug_decoder_);
  classifier_ = std::move(other.classifier_);
  collect_params();
  return *this;
}

// The parameter list points into this object, so it is rebuilt whenever the
// weights move.
void Model::collect_params() {
  params_.clear();
  for (int d = 0; d < 2; ++d) {
    DomainModel& dm = domain(d);
    dm.gcn.collect(params_);
    if (disentangled()) {
      dm.encoder.collect(params_);
      dm.fusion.collect(params_);
    }
    dm.user_tower.collect(params_);
    dm.item_tower.collect(params_);
    if (elbo()) dm.decoder.collect(params_);
  }
  if (disentangled()) {
    aug_encoder_.collect(params_);
    if (elbo()) aug_decoder_.collect(params_);
    else classifier_.collect(params_);
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : params_) n += p->value.size();
  return n;
}

void Model::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Model::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof kMagic);
  const std::string cfg = config_.to_text();
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  put<std::uint64_t>(out, num_users_);
  put<std::uint64_t>(out, num_items_[0]);
  put<std::uint64_t>(out, num_items_[1]);
  put<std::uint64_t>(out, params_.size());
  for (const Parameter* p : params_) {
    put<std::uint64_t>(out, p->name.size());
    out += p->name;
    put<std::uint64_t>(out, p->value.rows());
    put<std::uint64_t>(out, p->value.cols());
    out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double));
  }
  write_file_atomic(path, out);
}

Model Model::load(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError("not a model file: " + path.string());
  std::size_t pos = sizeof kMagic;
  const auto cfg_len = take<std::uint64_t>(in, pos);
  if (pos + cfg_len > in.size()) throw ParseError("model file truncated");
  RunConfig cfg = parse_run_config(in.substr(pos, cfg_len));
  pos += cfg_len;
  const auto m = take<std::uint64_t>(in, pos);
  const auto na = take<std::uint64_t>(in, pos);
  const auto nb = take<std::uint64_t>(in, pos);
  Model model(cfg, m, na, nb);
  if (take<std::uint64_t>(in, pos) != model.params_.size())
    throw ParseError("model file: parameter count mismatch");
  for (Parameter* p : model.params_) {
    const auto len = take<std::uint64_t>(in, pos);
    if (pos + len > in.size()) throw ParseError("model file truncated");
    if (in.compare(pos, len, p->name) != 0 || len != p->name.size())
      throw ParseError("model file: expected parameter " + p->name);
    pos += len;
    const auto r = take<std::uint64_t>(in, pos);
    const auto c = take<std::uint64_t>(in, pos);
    if (r != p->value.rows() || c != p->value.cols())
      throw ParseError("model file: shape mismatch for " + p->name);
    const std::size_t bytes = p->value.size() * sizeof(double);
    if (pos + bytes > in.size()) throw ParseError("model file truncated");
    std::memcpy(p->value.data(), in.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != in.size()) throw ParseError("model file: trailing bytes");
  return model;
}

DomainGraphs DomainGraphs::build(const PreparedData& data) {
  DomainGraphs g;
  for (int d = 0; d < 2; ++d) g.adj[static_cast<std::size_t>(d)] = build_bipartite_adjacency(data.domain(d).train);
  return g;
}

LossTerms total_loss(Tape& tape, Model& model, const DomainGraphs& graphs, const BatchPair& batch,
                     double lambda, std::uint64_t noise_seed, LossMode mode) {
  const RunConfig& cfg = model.config();
  const std::size_t m = model.num_users();

  NodeEmbeddings emb[2];
  for (int d = 0; d < 2; ++d) {
    const auto layers = propagate(tape, graphs.adj[static_cast<std::size_t>(d)], model.domain(d).gcn);
    emb[d] = assemble_node_embeddings(layers, m);
  }

  // Users of both batches; the augmented branch only sees these rows.
  std::vector<std::size_t> users;
  for (const auto& pairs : batch.pairs)
    for (const auto& p : pairs) users.push_back(p.user);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  if (users.empty()) throw ContractError("total_loss: empty batch pair");
  std::vector<std::size_t> user_row(m, SIZE_MAX);
  for (std::size_t r = 0; r < users.size(); ++r) user_row[users[r]] = r;

  Var eu[2] = {gather_rows(emb[0].users, users), gather_rows(emb[1].users, users)};
  Var user_in[2] = {eu[0], eu[1]};
  LossTerms out;

  if (model.disentangled()) {
    Var aug_in = interpolate(eu[0], eu[1], lambda);
    Rng noise_a(noise_seed, {0}), noise_b(noise_seed, {1}), noise_aug(noise_seed, {2});
    EncodedBranch enc[2] = {encode(eu[0], model.domain(0).encoder, &noise_a),
                            encode(eu[1], model.domain(1).encoder, &noise_b)};
    EncodedBranch aug = encode(aug_in, model.aug_encoder(), &noise_aug);
    const auto codes = fusion_codes(cfg.variant);
    for (int d = 0; d < 2; ++d) {
      std::vector<Var> parts;
      for (Code c : codes) parts.push_back(select_code(c, d, enc, aug));
      user_in[d] = fuse(parts, cfg.fusion, model.domain(d).fusion);
    }
    if (model.elbo()) {
      auto [kl_a, rec_a] = elbo_terms(enc[0], eu[0], model.domain(0).decoder);
      auto [kl_b, rec_b] = elbo_terms(enc[1], eu[1], model.domain(1).decoder);
      auto [kl_g, rec_g] = elbo_terms(aug, aug_in, model.aug_decoder());
      out.cls1 = scale(add(add(kl_a, kl_b), kl_g), 1.0 / 3.0);
      out.cls2 = scale(add(add(rec_a, rec_b), rec_g), 1.0 / 3.0);
    } else {
      out.cls1 = loss_cls1(enc[0].z2, enc[1].z2, aug.z2, lambda, model.classifier());
      out.cls2 = loss_cls2(enc[0].z1, enc[1].z1, aug.z1, model.classifier());
    }
  }

  for (int d = 0; d < 2; ++d) {
    const auto& pairs = batch.pairs[static_cast<std::size_t>(d)];
    if (pairs.empty()) continue;
    if ((mode == LossMode::kDomainA && d == 1) || (mode == LossMode::kDomainB && d == 0)) continue;
    DomainModel& dm = model.domain(d);
    std::vector<std::size_t> items;
    for (const auto& p : pairs) items.push_back(p.item);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    std::vector<std::size_t> s_idx, t_idx;
    std::vector<double> labels;
    for (const auto& p : pairs) {
      s_idx.push_back(user_row[p.user]);
      t_idx.push_back(static_cast<std::size_t>(
          std::lower_bound(items.begin(), items.end(), p.item) - items.begin()));
      labels.push_back(p.label);
    }
    Var s = tower_forward(user_in[d], dm.user_tower);
    Var t = tower_forward(gather_rows(emb[d].items, items), dm.item_tower);
    Var s_rows = gather_rows(s, std::move(s_idx));
    Var t_rows = gather_rows(t, std::move(t_idx));
    out.prd[d] = loss_prd(predict(s_rows, t_rows), labels, s_rows, t_rows, cfg.gamma);
  }

  Var total;
  auto accumulate = [&](Var term, double w) {
    if (!term.valid() || w == 0.0) return;
    Var scaled = w == 1.0 ? term : scale(term, w);
    total = total.valid() ? add(total, scaled) : scaled;
  };
  accumulate(out.prd[0], 1.0);
  accumulate(out.prd[1], 1.0);
  accumulate(out.cls1, cfg.mu1);
  accumulate(out.cls2, cfg.mu2);
  if (!total.valid()) throw ContractError("total_loss: nothing to optimize");
  out.total = total;
  return out;
}

Representations infer(Model& model, const DomainGraphs& graphs) {
  const RunConfig& cfg = model.config();
  const std::size_t m = model.num_users();
  Tape tape;
  NodeEmbeddings emb[2];
  for (int d = 0; d < 2; ++d) {
    const auto layers = propagate(tape, graphs.adj[static_cast<std::size_t>(d)], model.domain(d).gcn);
    emb[d] = assemble_node_embeddings(layers, m);
  }
  Var user_in[2] = {emb[0].users, emb[1].users};
  if (model.disentangled()) {
    Var aug_in = interpolate(emb[0].users, emb[1].users, cfg.eval_lambda());
    EncodedBranch enc[2] = {encode(emb[0].users, model.domain(0).encoder, nullptr),
                            encode(emb[1].users, model.domain(1).encoder, nullptr)};
    EncodedBranch aug = encode(aug_in, model.aug_encoder(), nullptr);
    const auto codes = fusion_codes(cfg.variant);
    for (int d = 0; d < 2; ++d) {
      std::vector<Var> parts;
      for (Code c : codes) parts.push_back(select_code(c, d, enc, aug));
      user_in[d] = fuse(parts, cfg.fusion, model.domain(d).fusion);
    }
  }
  Representations r;
  for (int d = 0; d < 2; ++d) {
    r.users[static_cast<std::size_t>(d)] = tower_forward(user_in[d], model.domain(d).user_tower).value();
    r.items[static_cast<std::size_t>(d)] = tower_forward(emb[d].items, model.domain(d).item_tower).value();
  }
  return r;
}

}  // namespace dida
