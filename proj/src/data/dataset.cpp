#include "dida/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dida/error.hpp"
#include "dida/rng.hpp"

namespace dida {

namespace {

constexpr std::uint64_t kTagSplit = 0x5350;
constexpr std::uint64_t kTagCandidates = 0x4341;

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Keeps only the pairs whose user and item survive, renumbering both in
// original order.
InteractionSet compact(const InteractionSet& set, const std::vector<char>& keep_user,
                       const std::vector<char>& keep_item) {
  std::vector<std::size_t> umap(set.num_users()), imap(set.num_items());
  InteractionSet out;
  for (std::size_t u = 0; u < set.num_users(); ++u)
    if (keep_user[u]) {
      umap[u] = out.user_keys.size();
      out.user_keys.push_back(set.user_keys[u]);
    }
  for (std::size_t i = 0; i < set.num_items(); ++i)
    if (keep_item[i]) {
      imap[i] = out.item_keys.size();
      out.item_keys.push_back(set.item_keys[i]);
    }
  for (std::size_t p = 0; p < set.pairs.size(); ++p) {
    const auto [u, i] = set.pairs[p];
    if (!keep_user[u] || !keep_item[i]) continue;
    out.pairs.push_back({umap[u], imap[i]});
    if (set.has_timestamps()) out.timestamps.push_back(set.timestamps[p]);
  }
  return out;
}

// Draws `count` distinct values from `pool` (partial Fisher-Yates on a copy).
std::vector<std::size_t> draw_distinct(std::vector<std::size_t> pool, std::size_t count,
                                       Rng& rng) {
  count = std::min(count, pool.size());
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t j = k + rng.below(pool.size() - k);
    std::swap(pool[k], pool[j]);
  }
  pool.resize(count);
  return pool;
}

// Items of [0, n) not in the sorted `seen`.
std::vector<std::size_t> complement(const std::vector<std::size_t>& seen, std::size_t n) {
  std::vector<std::size_t> out;
  out.reserve(n - std::min(n, seen.size()));
  std::size_t s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s < seen.size() && seen[s] == i) {
      ++s;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> InteractionSet::items_by_user() const {
  std::vector<std::vector<std::size_t>> out(num_users());
  for (auto [u, i] : pairs) out[u].push_back(i);
  return out;  // pairs are sorted, so each list is too
}

std::vector<std::size_t> InteractionSet::item_degrees() const {
  std::vector<std::size_t> deg(num_items(), 0);
  for (auto p : pairs) ++deg[p.item];
  return deg;
}

double InteractionSet::density() const {
  if (num_users() == 0 || num_items() == 0) return 0.0;
  return static_cast<double>(pairs.size()) /
         (static_cast<double>(num_users()) * static_cast<double>(num_items()));
}

void SyntheticSpec::validate() const {
  if (num_users == 0 || items_a == 0 || items_b == 0 || latent_dim == 0)
    throw ConfigError("synthetic spec: counts must be positive");
  if (shared_strength < 0 || specific_strength < 0 || independent_strength < 0)
    throw ConfigError("synthetic spec: strengths must be >= 0");
  if (!(rate_a > 0 && rate_a < 1) || !(rate_b > 0 && rate_b < 1))
    throw ConfigError("synthetic spec: rates must lie in (0, 1)");
}

std::vector<RawRating> parse_interactions(const std::string& text) {
  std::vector<RawRating> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      auto tab = rest.find('\t');
      f.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (f.size() != 3 && f.size() != 4)
      throw ParseError("expected 3 or 4 tab-separated fields, got " + std::to_string(f.size()),
                       lineno);
    if (f[0].empty() || f[1].empty()) throw ParseError("empty user or item key", lineno);
    RawRating r{std::string(f[0]), std::string(f[1]), 0.0, std::nullopt};
    if (!parse_double(f[2], r.rating) || !std::isfinite(r.rating))
      throw ParseError("bad rating '" + std::string(f[2]) + "'", lineno);
    if (f.size() == 4) {
      double ts;
      if (!parse_double(f[3], ts) || !std::isfinite(ts))
        throw ParseError("bad timestamp '" + std::string(f[3]) + "'", lineno);
      r.timestamp = ts;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawRating> load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_interactions(ss.str());
}

InteractionSet binarize_and_filter(const std::vector<RawRating>& raw, std::size_t min_count) {
  if (min_count == 0) throw ContractError("min_count must be >= 1");
  InteractionSet set;
  std::unordered_map<std::string, std::size_t> umap, imap;
  const bool with_ts =
      !raw.empty() && std::all_of(raw.begin(), raw.end(), [](const RawRating& r) {
        return r.timestamp.has_value();
      });
  struct Rec {
    Interaction p;
    double ts;
  };
  std::vector<Rec> recs;
  recs.reserve(raw.size());
  for (const auto& r : raw) {
    auto [uit, unew] = umap.try_emplace(r.user_key, set.user_keys.size());
    if (unew) set.user_keys.push_back(r.user_key);
    auto [iit, inew] = imap.try_emplace(r.item_key, set.item_keys.size());
    if (inew) set.item_keys.push_back(r.item_key);
    recs.push_back({{uit->second, iit->second}, with_ts ? *r.timestamp : 0.0});
  }
  std::sort(recs.begin(), recs.end(), [](const Rec& x, const Rec& y) { return x.p < y.p; });
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (!set.pairs.empty() && set.pairs.back() == recs[k].p) {
      if (with_ts) set.timestamps.back() = std::max(set.timestamps.back(), recs[k].ts);
      continue;
    }
    set.pairs.push_back(recs[k].p);
    if (with_ts) set.timestamps.push_back(recs[k].ts);
  }
  return filter_min_count(set, min_count);
}

InteractionSet filter_min_count(const InteractionSet& set, std::size_t min_count) {
  std::vector<char> ku(set.num_users(), 1), ki(set.num_items(), 1);
  std::vector<std::size_t> du, di;
  for (bool changed = true; changed;) {
    changed = false;
    du.assign(set.num_users(), 0);
    di.assign(set.num_items(), 0);
    for (auto [u, i] : set.pairs)
      if (ku[u] && ki[i]) ++du[u], ++di[i];
    for (std::size_t u = 0; u < du.size(); ++u)
      if (ku[u] && du[u] < min_count) ku[u] = 0, changed = true;
    for (std::size_t i = 0; i < di.size(); ++i)
      if (ki[i] && di[i] < min_count) ki[i] = 0, changed = true;
  }
  InteractionSet out = compact(set, ku, ki);
  if (out.pairs.empty()) throw DataError("no interactions left after filtering");
  return out;
}

AlignedPair align_common_users(const InteractionSet& a, const InteractionSet& b) {
  if (a.pairs.empty() || b.pairs.empty()) throw ContractError("align: empty domain");
  std::unordered_map<std::string, std::size_t> bidx;
  for (std::size_t u = 0; u < b.num_users(); ++u) bidx.emplace(b.user_keys[u], u);

  // Shared index follows A; B users are renumbered to match.
  std::vector<std::size_t> a_new(a.num_users(), SIZE_MAX), b_new(b.num_users(), SIZE_MAX);
  std::vector<std::string> keys;
  for (std::size_t u = 0; u < a.num_users(); ++u) {
    auto it = bidx.find(a.user_keys[u]);
    if (it == bidx.end()) continue;
    a_new[u] = b_new[it->second] = keys.size();
    keys.push_back(a.user_keys[u]);
  }
  if (keys.empty()) throw DataError("domains share no users");

  auto restrict = [&](const InteractionSet& s, const std::vector<std::size_t>& remap) {
    std::vector<char> used(s.num_items(), 0);
    for (auto [u, i] : s.pairs)
      if (remap[u] != SIZE_MAX) used[i] = 1;
    std::vector<std::size_t> imap(s.num_items());
    InteractionSet out;
    out.user_keys = keys;
    for (std::size_t i = 0; i < s.num_items(); ++i)
      if (used[i]) {
        imap[i] = out.item_keys.size();
        out.item_keys.push_back(s.item_keys[i]);
      }
    std::vector<std::pair<Interaction, double>> rec;
    for (std::size_t p = 0; p < s.pairs.size(); ++p) {
      auto [u, i] = s.pairs[p];
      if (remap[u] == SIZE_MAX) continue;
      rec.push_back({{remap[u], imap[i]}, s.has_timestamps() ? s.timestamps[p] : 0.0});
    }
    std::sort(rec.begin(), rec.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto& [p, ts] : rec) {
      out.pairs.push_back(p);
      if (s.has_timestamps()) out.timestamps.push_back(ts);
    }
    return out;
  };
  return {restrict(a, a_new), restrict(b, b_new)};
}

SplitDataset leave_one_out_split(const InteractionSet& set, std::uint64_t seed) {
  SplitDataset out;
  out.train.user_keys = set.user_keys;
  out.train.item_keys = set.item_keys;
  std::size_t begin = 0;
  while (begin < set.pairs.size()) {
    const std::size_t u = set.pairs[begin].user;
    std::size_t end = begin;
    while (end < set.pairs.size() && set.pairs[end].user == u) ++end;
    const std::size_t count = end - begin;
    if (count < 2)
      throw ContractError("user '" + set.user_keys[u] + "' has fewer than 2 interactions");
    std::size_t held;
    if (set.has_timestamps()) {
      held = begin;
      for (std::size_t p = begin + 1; p < end; ++p)
        if (set.timestamps[p] >= set.timestamps[held]) held = p;  // later item wins ties
    } else {
      Rng rng(seed, {kTagSplit, u});
      held = begin + rng.below(count);
    }
    for (std::size_t p = begin; p < end; ++p) {
      if (p == held) continue;
      out.train.pairs.push_back(set.pairs[p]);
      if (set.has_timestamps()) out.train.timestamps.push_back(set.timestamps[p]);
    }
    out.test.push_back({u, set.pairs[held].item});
    begin = end;
  }
  return out;
}

SplitDataset filter_cold_items(const SplitDataset& split) {
  SplitDataset out;
  out.train = split.train;
  std::vector<char> warm(split.train.num_items(), 0);
  for (auto p : split.train.pairs) warm[p.item] = 1;
  for (std::size_t t = 0; t < split.test.size(); ++t) {
    if (!warm[split.test[t].item]) continue;
    out.test.push_back(split.test[t]);
    if (!split.candidates.empty()) out.candidates.push_back(split.candidates[t]);
  }
  return out;
}

NegativeSample sample_train_negatives(const InteractionSet& train,
                                      const std::vector<TestEntry>& test, std::size_t ratio,
                                      std::uint64_t seed) {
  NegativeSample out;
  const std::size_t n = train.num_items();
  auto seen = train.items_by_user();
  for (const auto& t : test) {
    auto& s = seen[t.user];
    s.insert(std::lower_bound(s.begin(), s.end(), t.item), t.item);
  }
  std::vector<std::size_t> positives(train.num_users(), 0);
  for (auto p : train.pairs) ++positives[p.user];
  out.pairs.reserve(train.pairs.size() * ratio);
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    if (positives[u] == 0) continue;
    Rng rng(seed, {u});
    const auto& s = seen[u];
    const std::size_t pool = n - s.size();
    if (pool <= 2 * ratio) {
      // Small pool: explicit enumeration.
      auto unseen = complement(s, n);
      for (std::size_t k = 0; k < positives[u]; ++k) {
        if (pool < ratio) ++out.short_positives;
        for (std::size_t i : draw_distinct(unseen, ratio, rng)) out.pairs.push_back({u, i, 0.0});
      }
      continue;
    }
    // Large pool: rejection against the sorted seen list.
    std::vector<std::size_t> draw;
    for (std::size_t k = 0; k < positives[u]; ++k) {
      draw.clear();
      while (draw.size() < ratio) {
        std::size_t i = rng.below(n);
        if (std::binary_search(s.begin(), s.end(), i)) continue;
        if (std::find(draw.begin(), draw.end(), i) != draw.end()) continue;
        draw.push_back(i);
      }
      for (std::size_t i : draw) out.pairs.push_back({u, i, 0.0});
    }
  }
  return out;
}

SplitDataset sample_eval_candidates(const SplitDataset& split, std::size_t n,
                                    std::uint64_t seed) {
  SplitDataset out;
  out.train = split.train;
  out.test = split.test;
  const auto seen = split.train.items_by_user();
  const std::size_t num_items = split.train.num_items();
  out.candidates.resize(split.test.size());
  for (std::size_t t = 0; t < split.test.size(); ++t) {
    auto s = seen[split.test[t].user];
    s.insert(std::lower_bound(s.begin(), s.end(), split.test[t].item), split.test[t].item);
    auto pool = complement(s, num_items);
    if (pool.size() < n)
      throw DataError("user '" + split.train.user_keys[split.test[t].user] + "' has only " +
                      std::to_string(pool.size()) + " unseen items, need " + std::to_string(n));
    Rng rng(seed, {kTagCandidates, split.test[t].user});
    auto c = draw_distinct(std::move(pool), n, rng);
    std::sort(c.begin(), c.end());
    out.candidates[t] = std::move(c);
  }
  return out;
}

SyntheticRatings generate_synthetic_ratings(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t d = spec.latent_dim;
  Rng rng(seed, {0x5359});
  auto gaussian = [&](std::size_t r, std::size_t c) {
    std::vector<double> m(r * c);
    for (double& v : m) v = rng.normal();
    return m;
  };
  // Random orthogonal d x d matrix by Gram-Schmidt on a Gaussian draw.
  auto orthogonal = [&]() {
    std::vector<double> q = gaussian(d, d);
    for (std::size_t r = 0; r < d; ++r) {
      double* row = &q[r * d];
      for (std::size_t p = 0; p < r; ++p) {
        const double* prev = &q[p * d];
        double dot = 0;
        for (std::size_t c = 0; c < d; ++c) dot += row[c] * prev[c];
        for (std::size_t c = 0; c < d; ++c) row[c] -= dot * prev[c];
      }
      double norm = 0;
      for (std::size_t c = 0; c < d; ++c) norm += row[c] * row[c];
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < d; ++c) row[c] /= norm;
    }
    return q;
  };

  const std::size_t m = spec.num_users;
  const auto shared = gaussian(m, d);
  const auto indep = gaussian(m, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  auto domain = [&](std::size_t n_items, double rate, char prefix) {
    const auto specific = gaussian(m, d);
    const auto proj = orthogonal();
    const auto item_sha = gaussian(n_items, d);
    const auto item_spe = gaussian(n_items, d);
    const auto item_ind = gaussian(n_items, d);
    // Independent factor as seen by this domain: i_u projected by `proj`.
    std::vector<double> ind_proj(m * d, 0.0);
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) ind_proj[u * d + r] += proj[r * d + c] * indep[u * d + c];
    // P(u, j) proportional to sigmoid(aff_uj - 8), rescaled over rows and
    // columns until every user and every item expects about `rate` of its
    // line. The offset keeps the sigmoid off its plateau; a plain
    // sigmoid(aff) barely separates liked from unliked items.
    std::vector<double> w(m * n_items);
    for (std::size_t u = 0; u < m; ++u) {
      double* row = &w[u * n_items];
      for (std::size_t j = 0; j < n_items; ++j) {
        double sha = 0, spe = 0, ind = 0;
        for (std::size_t c = 0; c < d; ++c) {
          sha += shared[u * d + c] * item_sha[j * d + c];
          spe += specific[u * d + c] * item_spe[j * d + c];
          ind += ind_proj[u * d + c] * item_ind[j * d + c];
        }
        const double aff = scale * (spec.shared_strength * sha + spec.specific_strength * spe +
                                    spec.independent_strength * ind);
        row[j] = 1.0 / (1.0 + std::exp(8.0 - aff));
      }
    }
    std::vector<double> col(n_items);
    for (int pass = 0; pass < 8; ++pass) {
      for (std::size_t u = 0; u < m; ++u) {
        double* row = &w[u * n_items];
        const double s = std::accumulate(row, row + n_items, 0.0);
        for (std::size_t j = 0; j < n_items; ++j) row[j] *= rate * static_cast<double>(n_items) / s;
      }
      std::fill(col.begin(), col.end(), 0.0);
      for (std::size_t u = 0; u < m; ++u)
        for (std::size_t j = 0; j < n_items; ++j) col[j] += w[u * n_items + j];
      for (std::size_t u = 0; u < m; ++u)
        for (std::size_t j = 0; j < n_items; ++j)
          w[u * n_items + j] *= rate * static_cast<double>(m) / col[j];
    }
    std::vector<RawRating> out;
    for (std::size_t u = 0; u < m; ++u)
      for (std::size_t j = 0; j < n_items; ++j)
        if (rng.uniform() < std::min(1.0, w[u * n_items + j]))
          out.push_back({"u" + std::to_string(u), prefix + std::to_string(j), 1.0, std::nullopt});
    return out;
  };
  SyntheticRatings r;
  r.a = domain(spec.items_a, spec.rate_a, 'a');
  r.b = domain(spec.items_b, spec.rate_b, 'b');
  return r;
}

AlignedPair generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               std::size_t min_count) {
  auto raw = generate_synthetic_ratings(spec, seed);
  try {
    return align_common_users(binarize_and_filter(raw.a, min_count),
                              binarize_and_filter(raw.b, min_count));
  } catch (const DataError& e) {
    throw DataError(std::string("synthetic spec yields no usable data: ") + e.what());
  }
}

PreparedData prepare_split(const AlignedPair& aligned, std::uint64_t seed,
                           std::size_t eval_negatives) {
  PreparedData out;
  out.seed = seed;
  out.eval_negatives = eval_negatives;
  const InteractionSet* sets[] = {&aligned.a, &aligned.b};
  for (int d = 0; d < 2; ++d) {
    const std::uint64_t ds = derive_seed(seed, {static_cast<std::uint64_t>(d)});
    auto split = filter_cold_items(leave_one_out_split(*sets[d], ds));
    out.domain(d) = sample_eval_candidates(split, eval_negatives, ds);
  }
  return out;
}

std::vector<std::string> check_split_invariants(const SplitDataset& split,
                                                std::size_t eval_negatives) {
  std::vector<std::string> bad;
  const auto seen = split.train.items_by_user();
  const std::size_t n = split.train.num_items();
  std::vector<char> warm(n, 0);
  for (auto p : split.train.pairs) warm[p.item] = 1;
  for (std::size_t k = 1; k < split.train.pairs.size(); ++k)
    if (!(split.train.pairs[k - 1] < split.train.pairs[k]))
      bad.push_back("train pairs not sorted/unique at " + std::to_string(k));
  if (split.candidates.size() != split.test.size())
    bad.push_back("candidate list count differs from test count");
  std::vector<char> tested(split.train.num_users(), 0);
  for (std::size_t t = 0; t < split.test.size(); ++t) {
    const auto [u, item] = split.test[t];
    const std::string who = "test user " + std::to_string(u);
    if (u >= split.train.num_users() || item >= n) {
      bad.push_back(who + ": index out of range");
      continue;
    }
    if (tested[u]++) bad.push_back(who + ": more than one held-out item");
    const auto& s = seen[u];
    if (std::find(s.begin(), s.end(), item) != s.end()) bad.push_back(who + ": held-out item in train");
    if (!warm[item]) bad.push_back(who + ": cold held-out item");
    if (t >= split.candidates.size()) continue;
    const auto& c = split.candidates[t];
    if (c.size() != eval_negatives)
      bad.push_back(who + ": " + std::to_string(c.size()) + " candidates");
    std::vector<std::size_t> sorted = c;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      bad.push_back(who + ": duplicate candidates");
    for (std::size_t i : c) {
      if (i >= n || i == item || std::find(s.begin(), s.end(), i) != s.end()) {
        bad.push_back(who + ": candidate " + std::to_string(i) + " is seen or invalid");
        break;
      }
    }
  }
  return bad;
}

}  // namespace dida
