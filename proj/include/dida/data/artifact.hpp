#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "dida/data/dataset.hpp"

namespace dida {

// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

// Writes `contents` to a sibling temp file and renames it over `path`, so a
// crashed writer never leaves a truncated artifact behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// key=value lines, '#' comments.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& what);

// Prepared-dataset directory:
//   meta, users.tsv,
//   domain_a/{train,test,candidates,items}.tsv, domain_b/...
// `sources` are extra key=value pairs recorded in meta (source checksums).
void save_prepared(const std::filesystem::path& dir, const PreparedData& data,
                   const std::map<std::string, std::string>& sources = {});
// Throws MissingArtifactError for a missing file and ParseError / DataError
// for content that fails the checksum or shape checks.
PreparedData load_prepared(const std::filesystem::path& dir);

}  // namespace dida
