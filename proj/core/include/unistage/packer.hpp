// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Greedy packing of schedule-ordered records into fixed-length token
// sequences with a loss mask that covers output tokens only.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "unistage/model.hpp"

namespace unistage {

using TokenId = std::int32_t;

struct SpecialTokens {
  TokenId pad = 0;
  TokenId bos = 0;
  TokenId eos = 0;
  TokenId sep = 0;        // between instruction and output
  TokenId user = 0;       // role tag for multi-turn records
  TokenId assistant = 0;  // role tag for multi-turn records
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Throws on text the tokenizer cannot represent.
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> ids) const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual const SpecialTokens& specials() const = 0;
};

// Byte-level tokenizer: byte b is token b, specials follow at 256+.
// decode(encode(s)) == s for every byte string.
class DeskTokenizer final : public Tokenizer {
 public:
  DeskTokenizer();
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;
  std::size_t vocab_size() const override { return 262; }
  const SpecialTokens& specials() const override { return specials_; }

 private:
  SpecialTokens specials_;
};

// Greedy longest-match over a vocabulary loaded from JSON:
//   {"vocab": {"piece": id, ...}, "byte_fallback": true,
//    "specials": {"pad": id, "bos": id, "eos": id, "sep": id, "user": id, "assistant": id}}
// With byte_fallback, pieces "<0x00>".."<0xFF>" must exist and cover bytes
// no other piece matches.
class VocabTokenizer final : public Tokenizer {
 public:
  static std::unique_ptr<VocabTokenizer> load(const std::filesystem::path& path);
  static std::unique_ptr<VocabTokenizer> from_json(const nlohmann::json& spec);

  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;
  std::size_t vocab_size() const override { return vocab_size_; }
  const SpecialTokens& specials() const override { return specials_; }

 private:
  std::unordered_map<std::string, TokenId> pieces_;
  std::unordered_map<TokenId, std::string> id_to_piece_;
  std::vector<std::optional<TokenId>> byte_ids_;
  std::size_t max_piece_ = 0;
  std::size_t vocab_size_ = 0;
  SpecialTokens specials_;
};

struct RecordSpan {
  std::string record_id;
  std::size_t start = 0;            // first token (bos)
  std::size_t end = 0;              // one past the last token (eos)
  std::size_t instruction_end = 0;  // first token after the instruction block
};

struct PackedSequence {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> loss_mask;
  std::vector<RecordSpan> boundaries;
  std::size_t pad_count = 0;
};

// One record laid out as tokens: bos, instruction, sep, output, eos.
// Multi-turn records: bos, then per turn a role tag and its text, then eos;
// only assistant text is masked in.
struct EncodedRecord {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  std::size_t instruction_end = 0;
  std::size_t output_tokens = 0;
};

EncodedRecord encode_record(const InstructionRecord& rec, const Tokenizer& tok);

struct PackStats {
  std::size_t records_in = 0;
  std::size_t records_packed = 0;
  std::size_t sequences = 0;
  std::vector<std::string> skipped_overlong;
  std::vector<std::string> tokenizer_failures;
};

// Streaming packer. push() returns a finished sequence whenever the incoming
// record does not fit in the open buffer.
class Packer {
 public:
  Packer(const Tokenizer& tok, std::size_t length);

  std::optional<PackedSequence> push(const InstructionRecord& rec);
  std::optional<PackedSequence> finish();
  const PackStats& stats() const { return stats_; }

 private:
  PackedSequence seal();

  const Tokenizer& tok_;
  std::size_t length_;
  PackedSequence open_;
  PackStats stats_;
};

struct PackResult {
  std::vector<PackedSequence> sequences;
  PackStats stats;
};

PackResult pack(const std::vector<InstructionRecord>& records, const Tokenizer& tok, std::size_t length = 4096);

struct MaskReport {
  std::size_t sequences = 0;
  std::size_t total_tokens = 0;
  std::size_t mask_sum = 0;
  std::size_t pad_tokens = 0;
  double pad_fraction = 0.0;
  std::map<std::size_t, std::size_t> records_per_sequence;  // records -> sequence count
};

MaskReport mask_stats(const std::vector<PackedSequence>& seqs);

// Checks length, mask placement and span layout. Throws ValidationError.
void validate(const PackedSequence& seq, std::size_t length, const Tokenizer& tok);

void to_json(nlohmann::json& j, const PackedSequence& v);
void from_json(const nlohmann::json& j, PackedSequence& v);
void to_json(nlohmann::json& j, const MaskReport& v);
void to_json(nlohmann::json& j, const PackStats& v);

}  // namespace unistage
