#include "dida/data/artifact.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dida/error.hpp"

namespace dida {

namespace fs = std::filesystem;

namespace {

const char* const kDomainDir[] = {"domain_a", "domain_b"};

std::size_t parse_index(std::string_view s, const std::string& what, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(what + ": bad index '" + std::string(s) + "'", line);
  return v;
}

// Splits non-empty, non-comment lines at the first tab.
template <typename F>
void for_each_row(const std::string& text, const std::string& what, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(what + ": missing tab", lineno);
    f(std::string_view(line).substr(0, tab), std::string_view(line).substr(tab + 1), lineno);
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing artifact " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& what) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(what + ": expected key=value", lineno);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(what + ": empty key", lineno);
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw ParseError(what + ": duplicate key '" + key + "'", lineno);
  }
  return kv;
}

void save_prepared(const fs::path& dir, const PreparedData& data,
                   const std::map<std::string, std::string>& sources) {
  std::map<std::string, std::string> meta = sources;
  meta["format"] = "dida-prepared-1";
  meta["seed"] = std::to_string(data.seed);
  meta["eval_negatives"] = std::to_string(data.eval_negatives);
  meta["num_users"] = std::to_string(data.num_users());

  auto put = [&](const fs::path& rel, const std::string& body) {
    write_file_atomic(dir / rel, body);
    meta["checksum." + rel.generic_string()] = hex64(fnv1a64(body));
  };

  std::string users;
  for (const auto& k : data.a.train.user_keys) users += k + "\n";
  put("users.tsv", users);

  for (int d = 0; d < 2; ++d) {
    const SplitDataset& s = data.domain(d);
    const fs::path sub = kDomainDir[d];
    std::string items, train, test, cand;
    for (const auto& k : s.train.item_keys) items += k + "\n";
    for (auto p : s.train.pairs) train += std::to_string(p.user) + "\t" + std::to_string(p.item) + "\n";
    for (std::size_t t = 0; t < s.test.size(); ++t) {
      test += std::to_string(s.test[t].user) + "\t" + std::to_string(s.test[t].item) + "\n";
      cand += std::to_string(s.test[t].user) + "\t";
      for (std::size_t c = 0; c < s.candidates[t].size(); ++c) {
        if (c) cand += ',';
        cand += std::to_string(s.candidates[t][c]);
      }
      cand += "\n";
    }
    const std::string tag = d == 0 ? "a" : "b";
    meta["num_items_" + tag] = std::to_string(s.train.num_items());
    meta["num_train_" + tag] = std::to_string(s.train.pairs.size());
    meta["num_test_" + tag] = std::to_string(s.test.size());
    put(sub / "items.tsv", items);
    put(sub / "train.tsv", train);
    put(sub / "test.tsv", test);
    put(sub / "candidates.tsv", cand);
  }
  std::string text = "# prepared two-domain dataset\n";
  for (const auto& [k, v] : meta) text += k + "=" + v + "\n";
  write_file_atomic(dir / "meta", text);
}

PreparedData load_prepared(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingArtifactError("no prepared dataset at " + dir.string());
  const auto meta = parse_key_values(read_file(dir / "meta"), "meta");
  auto need = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw ParseError("meta: missing key '" + key + "'");
    return it->second;
  };
  auto need_count = [&](const std::string& key) { return parse_index(need(key), "meta " + key, 0); };
  if (need("format") != "dida-prepared-1") throw ParseError("meta: unknown format");

  auto load = [&](const fs::path& rel) {
    std::string body = read_file(dir / rel);
    if (hex64(fnv1a64(body)) != need("checksum." + rel.generic_string()))
      throw DataError("checksum mismatch for " + rel.generic_string());
    return body;
  };
  auto lines = [](const std::string& body) {
    std::vector<std::string> out;
    std::istringstream in(body);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  };

  PreparedData data;
  data.seed = std::stoull(need("seed"));
  data.eval_negatives = need_count("eval_negatives");
  const auto users = lines(load("users.tsv"));
  if (users.size() != need_count("num_users")) throw DataError("users.tsv: count mismatch");

  for (int d = 0; d < 2; ++d) {
    SplitDataset& s = data.domain(d);
    const fs::path sub = kDomainDir[d];
    const std::string tag = d == 0 ? "a" : "b";
    s.train.user_keys = users;
    s.train.item_keys = lines(load(sub / "items.tsv"));
    const std::size_t m = users.size(), n = s.train.num_items();
    if (n != need_count("num_items_" + tag)) throw DataError("items.tsv: count mismatch");
    auto check = [&](std::size_t u, std::size_t i, const std::string& what, std::size_t line) {
      if (u >= m || i >= n) throw ParseError(what + ": index out of range", line);
    };
    const std::string train_name = (sub / "train.tsv").generic_string();
    for_each_row(load(sub / "train.tsv"), train_name,
                 [&](std::string_view a, std::string_view b, std::size_t line) {
                   Interaction p{parse_index(a, train_name, line), parse_index(b, train_name, line)};
                   check(p.user, p.item, train_name, line);
                   if (!s.train.pairs.empty() && !(s.train.pairs.back() < p))
                     throw ParseError(train_name + ": rows not sorted/unique", line);
                   s.train.pairs.push_back(p);
                 });
    const std::string test_name = (sub / "test.tsv").generic_string();
    for_each_row(load(sub / "test.tsv"), test_name,
                 [&](std::string_view a, std::string_view b, std::size_t line) {
                   TestEntry t{parse_index(a, test_name, line), parse_index(b, test_name, line)};
                   check(t.user, t.item, test_name, line);
                   s.test.push_back(t);
                 });
    const std::string cand_name = (sub / "candidates.tsv").generic_string();
    for_each_row(load(sub / "candidates.tsv"), cand_name,
                 [&](std::string_view a, std::string_view list, std::size_t line) {
                   const std::size_t row = s.candidates.size();
                   if (row >= s.test.size() || parse_index(a, cand_name, line) != s.test[row].user)
                     throw ParseError(cand_name + ": rows do not follow test.tsv", line);
                   std::vector<std::size_t> c;
                   while (!list.empty()) {
                     auto comma = list.find(',');
                     c.push_back(parse_index(list.substr(0, comma), cand_name, line));
                     check(0, c.back(), cand_name, line);
                     if (comma == std::string_view::npos) break;
                     list.remove_prefix(comma + 1);
                   }
                   s.candidates.push_back(std::move(c));
                 });
    if (s.candidates.size() != s.test.size()) throw DataError(cand_name + ": row count mismatch");
    if (s.train.pairs.size() != need_count("num_train_" + tag) ||
        s.test.size() != need_count("num_test_" + tag))
      throw DataError("domain " + tag + ": meta counts disagree with files");
  }
  return data;
}

}  // namespace dida
