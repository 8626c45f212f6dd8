#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dida {

struct RawRating {
  std::string user_key;
  std::string item_key;
  double rating = 0.0;
  std::optional<double> timestamp;
};

struct Interaction {
  std::size_t user;
  std::size_t item;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// Binarized interactions of one domain. Pairs are sorted by (user, item) and
// unique. `user_keys[u]` / `item_keys[i]` map dense indices back to the
// opaque keys of the source file. When the source carried timestamps,
// `timestamps` runs parallel to `pairs` (latest timestamp of a duplicated
// pair); otherwise it is empty.
//
// A train set produced by splitting keeps the full item catalogue, so an item
// may have no train interaction there (the cold items).
struct InteractionSet {
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  std::vector<Interaction> pairs;
  std::vector<double> timestamps;

  std::size_t num_users() const { return user_keys.size(); }
  std::size_t num_items() const { return item_keys.size(); }
  bool has_timestamps() const { return !timestamps.empty(); }

  // Sorted item list per user.
  std::vector<std::vector<std::size_t>> items_by_user() const;
  std::vector<std::size_t> item_degrees() const;
  double density() const;
};

struct TestEntry {
  std::size_t user;
  std::size_t item;
  friend bool operator==(const TestEntry&, const TestEntry&) = default;
};

// `candidates[t]` are the sampled negatives of `test[t]`; empty until
// sample_eval_candidates ran.
struct SplitDataset {
  InteractionSet train;
  std::vector<TestEntry> test;
  std::vector<std::vector<std::size_t>> candidates;
};

struct LabeledPair {
  std::size_t user;
  std::size_t item;
  double label;
};

struct NegativeSample {
  std::vector<LabeledPair> pairs;
  // Positives whose user had fewer unseen items than the ratio.
  std::size_t short_positives = 0;
};

struct SyntheticSpec {
  std::size_t num_users = 500;
  std::size_t items_a = 1600;
  std::size_t items_b = 1200;
  std::size_t latent_dim = 8;
  double shared_strength = 3.0;
  double specific_strength = 1.0;
  double independent_strength = 1.0;
  double rate_a = 0.04;
  double rate_b = 0.02;

  void validate() const;
};

inline constexpr std::size_t kDefaultMinCount = 5;
inline constexpr std::size_t kDefaultEvalNegatives = 999;
inline constexpr std::size_t kDefaultNegativeRatio = 7;

// Tab-separated `user item rating [timestamp]`; `#` lines and blank lines
// skipped. Throws ParseError with the line number.
std::vector<RawRating> load_interactions(const std::filesystem::path& path);
std::vector<RawRating> parse_interactions(const std::string& text);

// Every rating becomes an interaction; users and items with fewer than
// `min_count` interactions are removed repeatedly until none remain.
// Indices are assigned in first-appearance order of the keys.
InteractionSet binarize_and_filter(const std::vector<RawRating>& raw,
                                   std::size_t min_count = kDefaultMinCount);
// Same filter on an existing set; keys are kept, indices re-densified.
InteractionSet filter_min_count(const InteractionSet& set, std::size_t min_count);

struct AlignedPair {
  InteractionSet a;
  InteractionSet b;
};
// Restricts both domains to the users whose key appears in both. The shared
// user index follows the order of A; unused items are dropped per domain.
AlignedPair align_common_users(const InteractionSet& a, const InteractionSet& b);

// Withholds one interaction per user: the latest one when timestamps exist
// (ties go to the larger item index), else a uniform pick from the stream
// (seed, user).
SplitDataset leave_one_out_split(const InteractionSet& set, std::uint64_t seed);

// Drops test entries whose item never occurs in train.
SplitDataset filter_cold_items(const SplitDataset& split);

// For every train positive, `ratio` distinct items drawn uniformly from the
// user's unseen pool (train and test items excluded). Draws of user u come
// from stream (seed, u), so the result does not depend on thread count.
NegativeSample sample_train_negatives(const InteractionSet& train,
                                      const std::vector<TestEntry>& test,
                                      std::size_t ratio, std::uint64_t seed);

// Fills `candidates` with `n` distinct negatives per test user. Throws
// DataError when a user has fewer than `n` unseen items.
SplitDataset sample_eval_candidates(const SplitDataset& split, std::size_t n,
                                    std::uint64_t seed);

// Raw ratings with planted shared / specific / independent factors. Users are
// keyed `u<index>` in both domains, items `a<j>` and `b<j>`.
struct SyntheticRatings {
  std::vector<RawRating> a;
  std::vector<RawRating> b;
};
SyntheticRatings generate_synthetic_ratings(const SyntheticSpec& spec, std::uint64_t seed);
// Ratings filtered at `min_count` and aligned; DataError when nothing is left.
AlignedPair generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               std::size_t min_count = kDefaultMinCount);

// Two prepared domains sharing one user index.
struct PreparedData {
  SplitDataset a;
  SplitDataset b;
  std::uint64_t seed = 0;
  std::size_t eval_negatives = kDefaultEvalNegatives;

  std::size_t num_users() const { return a.train.num_users(); }
  const SplitDataset& domain(int d) const { return d == 0 ? a : b; }
  SplitDataset& domain(int d) { return d == 0 ? a : b; }
};

// split -> cold filter -> candidates, per domain, on an aligned pair.
PreparedData prepare_split(const AlignedPair& aligned, std::uint64_t seed,
                           std::size_t eval_negatives = kDefaultEvalNegatives);

// Exhaustive split invariants; returns one message per violation.
std::vector<std::string> check_split_invariants(const SplitDataset& split,
                                                std::size_t eval_negatives);

}  // namespace dida
