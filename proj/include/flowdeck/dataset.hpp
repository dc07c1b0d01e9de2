#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "flowdeck/data.hpp"

namespace flowdeck {

/// Data bound to one named source. A record sequence is a single collection
/// in batch programs and an ordered stream in tuple programs; chunks feed
/// micro-batch programs; a list of collections feeds several independent
/// collection tokens through the same program.
using SourceData = std::variant<std::vector<Record>, std::vector<StreamChunk>, std::vector<Multiset>>;
using Inputs = std::map<std::string, SourceData>;

/// Everything a sink received, raw and in arrival order.
struct SinkOutput {
  std::vector<Token> tokens;

  /// Union of every record received.
  Multiset bag() const {
    Multiset all;
    for (const auto& t : tokens) {
      for (auto& r : t.records()) all.add(std::move(r));
    }
    return all;
  }

  std::vector<Record> records() const { return bag().records(); }

  std::vector<StreamChunk> chunks() const {
    std::vector<StreamChunk> out;
    for (const auto& t : tokens) {
      if (t.kind() == TokenKind::kMicroBatch) out.push_back(t.chunk());
    }
    return out;
  }
};

using Outputs = std::map<std::string, SinkOutput>;

namespace detail {

inline void encode_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void encode_record(std::string& out, const Record& r) {
  out += r.key ? 'K' : 'U';
  std::string text;
  if (r.key) {
    text = r.key->to_string();
    encode_u64(out, text.size());
    out += text;
  }
  text = r.payload.to_string();
  encode_u64(out, text.size());
  out += text;
}

}  // namespace detail

/// Byte encoding of a token sequence that preserves every ordering detail:
/// token order, record order inside tokens, tags and chunk numbers. Two
/// sinks saw the same thing iff their encodings are identical.
inline std::string encode_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += static_cast<char>('0' + static_cast<int>(t.kind()));
    if (t.tag()) {
      out += 'T';
      detail::encode_u64(out, t.tag()->tag);
      detail::encode_u64(out, t.tag()->iteration);
    }
    switch (t.kind()) {
      case TokenKind::kCollection:
        detail::encode_u64(out, t.collection().size());
        for (const auto& r : t.collection()) detail::encode_record(out, r);
        break;
      case TokenKind::kMicroBatch:
        detail::encode_u64(out, t.chunk().seq);
        detail::encode_u64(out, t.chunk().batch.size());
        for (const auto& r : t.chunk().batch) detail::encode_record(out, r);
        break;
      case TokenKind::kTuple:
        detail::encode_record(out, t.tuple());
        break;
      case TokenKind::kControl:
        detail::encode_u64(out, static_cast<std::uint64_t>(t.control().tag));
        break;
      case TokenKind::kEndOfStream:
        break;
    }
  }
  return out;
}

inline bool bag_equal(const Outputs& a, const Outputs& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, out] : a) {
    auto it = b.find(name);
    if (it == b.end() || !bag_equal(out.bag(), it->second.bag())) return false;
  }
  return true;
}

}  // namespace flowdeck
