// interbias/io.hpp

// Copyright 2026  The InterBias Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// On-disk formats. Binary containers are little-endian with float32 payloads:
//   posteriorgram  "PGRD" u32 T, u32 |V'|, T·|V'| float32 row-major
//   features       "FEAT" u32 T, u32 D,    T·D    float32 row-major
//   checkpoint     "SCND" u32 version(1), u32 N, u32 D, u32 |V'|,
//                  u64 conditioning-layer bitmask, u32 input_dim,
//                  u32 hidden_dim, u64 vocab_hash, then float32 parameter
//                  blocks in EncoderModel::visit_params order.
// Vocabulary files are one token per line, the literal `<blank>` last.
// Config files are `key = value` lines with '#' comments.

#ifndef INTERBIAS_IO_HPP_
#define INTERBIAS_IO_HPP_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "interbias/encoder.hpp"
#include "interbias/errors.hpp"
#include "interbias/matrix.hpp"
#include "interbias/synth.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

namespace io {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("io: truncated file (u32)");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  write_u32(os, static_cast<uint32_t>(v));
  write_u32(os, static_cast<uint32_t>(v >> 32));
}

inline uint64_t read_u64(std::istream& is) {
  uint64_t lo = read_u32(is);
  uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

inline void write_f32_block(std::ostream& os, const Matrix& m) {
  for (double v : m.data()) {
    float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(os, bits);
  }
}

inline void read_f32_block(std::istream& is, Matrix& m) {
  for (double& v : m.data()) {
    uint32_t bits = read_u32(is);
    float f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
}

inline void write_magic(std::ostream& os, const char magic[5]) { os.write(magic, 4); }

inline void check_magic(std::istream& is, const char magic[5], const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw DataError("io: bad magic, expected " + what);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

}  // namespace io

inline void save_posteriorgram(const std::string& path, const PosteriorGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("io: cannot write " + path);
  io::write_magic(os, "PGRD");
  io::write_u32(os, static_cast<uint32_t>(grid.num_frames()));
  io::write_u32(os, static_cast<uint32_t>(grid.vocab_size()));
  io::write_f32_block(os, grid.probs);
}

inline PosteriorGrid load_posteriorgram(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("io: cannot read " + path);
  io::check_magic(is, "PGRD", "PGRD");
  uint32_t t = io::read_u32(is), vp = io::read_u32(is);
  Matrix m(static_cast<int>(t), static_cast<int>(vp));
  io::read_f32_block(is, m);
  return PosteriorGrid(std::move(m));
}

inline void save_features(const std::string& path, const FeatureSequence& feats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("io: cannot write " + path);
  io::write_magic(os, "FEAT");
  io::write_u32(os, static_cast<uint32_t>(feats.rows()));
  io::write_u32(os, static_cast<uint32_t>(feats.cols()));
  io::write_f32_block(os, feats);
}

inline FeatureSequence load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("io: cannot read " + path);
  io::check_magic(is, "FEAT", "FEAT");
  uint32_t t = io::read_u32(is), d = io::read_u32(is);
  Matrix m(static_cast<int>(t), static_cast<int>(d));
  io::read_f32_block(is, m);
  return m;
}

inline void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  std::ofstream os(path);
  if (!os) throw DataError("io: cannot write " + path);
  for (const std::string& tok : vocab.tokens()) os << tok << "\n";
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("io: cannot read " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) tokens.push_back(line);
  if (tokens.empty() || tokens.back() != kBlankToken)
    throw DataError("io: vocabulary must end with the literal " +
                    std::string(kBlankToken));
  tokens.pop_back();
  return Vocabulary::from_labels(tokens);
}

inline uint64_t vocab_hash(const Vocabulary& vocab) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& tok : vocab.tokens()) {
    for (unsigned char c : tok) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= '\n';
    h *= 0x100000001b3ull;
  }
  return h;
}

inline void save_checkpoint(const std::string& path, const EncoderModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("io: cannot write " + path);
  io::write_magic(os, "SCND");
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<uint32_t>(model.num_layers));
  io::write_u32(os, static_cast<uint32_t>(model.dim));
  io::write_u32(os, static_cast<uint32_t>(model.vocab.size()));
  uint64_t mask = 0;
  for (int n : model.cond_layers) mask |= (1ull << n);
  io::write_u64(os, mask);
  io::write_u32(os, static_cast<uint32_t>(model.input_dim));
  io::write_u32(os, static_cast<uint32_t>(model.hidden_dim));
  io::write_u64(os, vocab_hash(model.vocab));
  model.visit_params([&](const std::string&, const Matrix& m) {
    io::write_f32_block(os, m);
  });
}

inline EncoderModel load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("io: cannot read " + path);
  io::check_magic(is, "SCND", "SCND");
  uint32_t version = io::read_u32(is);
  if (version != 1) throw DataError("io: unsupported checkpoint version");
  uint32_t n = io::read_u32(is), d = io::read_u32(is), vp = io::read_u32(is);
  uint64_t mask = io::read_u64(is);
  uint32_t d_in = io::read_u32(is), hidden = io::read_u32(is);
  uint64_t vhash = io::read_u64(is);
  if (vp != static_cast<uint32_t>(vocab.size()))
    throw DataError("io: checkpoint vocabulary size mismatch");
  if (vhash != vocab_hash(vocab))
    throw DataError("io: checkpoint vocabulary hash mismatch");
  std::vector<int> cond;
  for (int i = 0; i < 64; ++i)
    if (mask & (1ull << i)) cond.push_back(i);
  EncoderModel model = EncoderModel::init(static_cast<int>(n), static_cast<int>(d),
                                          static_cast<int>(d_in),
                                          static_cast<int>(hidden), cond, vocab, 0);
  model.visit_params([&](const std::string&, Matrix& m) {
    io::read_f32_block(is, m);
  });
  if (!is) throw DataError("io: truncated checkpoint");
  return model;
}

/// Flat `key = value` configuration with typed getters. Unknown keys are kept
/// (manifests are a superset of configs).
class Config {
 public:
  Config() = default;

  static Config load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("config: cannot read " + path);
    Config c;
    std::string line;
    while (std::getline(is, line)) {
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      c.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return c;
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("config: cannot write " + path);
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set_int(const std::string& key, int64_t v) { values_[key] = std::to_string(v); }
  void set_double(const std::string& key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    values_[key] = buf;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  int64_t get_int(const std::string& key, int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw DataError("config: key '" + key + "' is not an integer: " + it->second);
    }
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw DataError("config: key '" + key + "' is not a number: " + it->second);
    }
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    for (const std::string& part : io::split(it->second, ',')) {
      std::string p = trim(part);
      if (p.empty()) continue;
      out.push_back(std::stoi(p));
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(std::string s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Corpus directory layout:
//   vocab.txt, train.tsv, dev.tsv, test.tsv, keywords_meta.tsv, feats/*.feat
// Split manifests are `utt_id<TAB>text<TAB>feature_file` (paths relative to
// the corpus directory).

inline void save_corpus(const std::string& dir, const CorpusBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  save_vocabulary((fs::path(dir) / "vocab.txt").string(), bundle.vocab);

  auto save_split = [&](const std::string& name, const std::vector<Utterance>& utts) {
    std::ofstream os(fs::path(dir) / (name + ".tsv"));
    if (!os) throw DataError("io: cannot write split " + name);
    for (const Utterance& u : utts) {
      std::string rel = "feats/" + u.id + ".feat";
      save_features((fs::path(dir) / rel).string(), u.features);
      os << u.id << "\t" << u.text << "\t" << rel << "\n";
    }
  };
  save_split("train", bundle.train);
  save_split("dev", bundle.dev);
  save_split("test", bundle.test);

  std::ofstream os(fs::path(dir) / "keywords_meta.tsv");
  for (const KeywordMeta& km : bundle.keywords)
    os << km.keyword << "\t" << (km.oov ? "oov" : "nonoov") << "\n";
}

inline std::vector<Utterance> load_split(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / (name + ".tsv"));
  if (!is) throw DataError("io: cannot read split '" + name + "' in " + dir);
  std::vector<Utterance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols = io::split(line, '\t');
    if (cols.size() != 3) throw DataError("io: bad split line: " + line);
    Utterance u;
    u.id = cols[0];
    u.text = cols[1];
    u.features = load_features((fs::path(dir) / cols[2]).string());
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<KeywordMeta> load_keywords_meta(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "keywords_meta.tsv");
  if (!is) throw DataError("io: cannot read keywords_meta.tsv in " + dir);
  std::vector<KeywordMeta> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols = io::split(line, '\t');
    if (cols.size() != 2 || (cols[1] != "oov" && cols[1] != "nonoov"))
      throw DataError("io: bad keywords_meta line: " + line);
    out.push_back({cols[0], cols[1] == "oov"});
  }
  return out;
}

/// Companion manifest written next to every produced artifact; rerunning the
/// recorded command with this file as --config reproduces the artifact.
inline void save_manifest(const std::string& artifact_path, const std::string& command,
                          const Config& resolved) {
  Config manifest = resolved;
  manifest.set("command", command);
  manifest.save_file(artifact_path + ".manifest");
}

}  // namespace interbias

#endif  // INTERBIAS_IO_HPP_
