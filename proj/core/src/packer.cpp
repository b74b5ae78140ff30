// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/packer.hpp"

#include <algorithm>
#include <fstream>

#include "unistage/error.hpp"

namespace unistage {

DeskTokenizer::DeskTokenizer() {
  specials_.pad = 256;
  specials_.bos = 257;
  specials_.eos = 258;
  specials_.sep = 259;
  specials_.user = 260;
  specials_.assistant = 261;
}

std::vector<TokenId> DeskTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c));
  return ids;
}

std::string DeskTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<VocabTokenizer> VocabTokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tokenizer spec " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("tokenizer spec " + path.string() + ": " + e.what());
  }
}

std::unique_ptr<VocabTokenizer> VocabTokenizer::from_json(const nlohmann::json& spec) try {
  auto t = std::unique_ptr<VocabTokenizer>(new VocabTokenizer());
  t->byte_ids_.assign(256, std::nullopt);
  TokenId max_id = -1;
  for (const auto& [piece, id_json] : spec.at("vocab").items()) {
    const auto id = id_json.get<TokenId>();
    if (id < 0) throw ValidationError("tokenizer spec: negative id for '" + piece + "'");
    max_id = std::max(max_id, id);
    t->id_to_piece_[id] = piece;
    if (piece.size() == 6 && piece.starts_with("<0x") && piece.back() == '>') {
      t->byte_ids_[std::stoul(piece.substr(3, 2), nullptr, 16)] = id;
      continue;
    }
    if (piece.empty()) throw ValidationError("tokenizer spec: empty piece");
    t->pieces_[piece] = id;
    t->max_piece_ = std::max(t->max_piece_, piece.size());
  }
  const auto& sp = spec.at("specials");
  t->specials_.pad = sp.at("pad").get<TokenId>();
  t->specials_.bos = sp.at("bos").get<TokenId>();
  t->specials_.eos = sp.at("eos").get<TokenId>();
  t->specials_.sep = sp.at("sep").get<TokenId>();
  t->specials_.user = sp.value("user", t->specials_.sep);
  t->specials_.assistant = sp.value("assistant", t->specials_.sep);
  for (auto id : {t->specials_.pad, t->specials_.bos, t->specials_.eos, t->specials_.sep, t->specials_.user,
                  t->specials_.assistant}) {
    max_id = std::max(max_id, id);
    if (t->id_to_piece_.contains(id)) throw ValidationError("tokenizer spec: special id collides with a piece");
  }
  if (spec.value("byte_fallback", false)) {
    for (std::size_t b = 0; b < 256; ++b) {
      if (!t->byte_ids_[b]) throw ValidationError("tokenizer spec: byte_fallback without all <0xNN> pieces");
    }
  }
  t->vocab_size_ = static_cast<std::size_t>(max_id) + 1;
  return t;
} catch (const nlohmann::json::exception& e) {
  throw ValidationError(std::string("tokenizer spec: ") + e.what());
}

std::vector<TokenId> VocabTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = std::min(max_piece_, text.size() - i);
    for (; len > 0; --len) {
      if (auto it = pieces_.find(std::string(text.substr(i, len))); it != pieces_.end()) {
        ids.push_back(it->second);
        break;
      }
    }
    if (len > 0) {
      i += len;
      continue;
    }
    const auto b = static_cast<unsigned char>(text[i]);
    if (!byte_ids_[b]) throw ValidationError("tokenizer: no piece covers byte " + std::to_string(b));
    ids.push_back(*byte_ids_[b]);
    ++i;
  }
  return ids;
}

std::string VocabTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) {
    auto it = id_to_piece_.find(id);
    if (it == id_to_piece_.end()) continue;
    const auto& piece = it->second;
    if (piece.size() == 6 && piece.starts_with("<0x") && piece.back() == '>') {
      out.push_back(static_cast<char>(std::stoul(piece.substr(3, 2), nullptr, 16)));
    } else {
      out += piece;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

EncodedRecord encode_record(const InstructionRecord& rec, const Tokenizer& tok) {
  const auto& sp = tok.specials();
  EncodedRecord er;
  auto append = [&](const std::vector<TokenId>& ids, std::uint8_t m) {
    er.ids.insert(er.ids.end(), ids.begin(), ids.end());
    er.mask.insert(er.mask.end(), ids.size(), m);
  };
  er.ids.push_back(sp.bos);
  er.mask.push_back(0);
  if (rec.origin == Origin::general_chat && !rec.turns.empty()) {
    bool instruction_closed = false;
    for (const auto& turn : rec.turns) {
      const bool assistant = turn.role == Role::assistant;
      if (assistant && !instruction_closed) {
        er.instruction_end = er.ids.size();
        instruction_closed = true;
      }
      er.ids.push_back(assistant ? sp.assistant : sp.user);
      er.mask.push_back(0);
      const auto ids = tok.encode(turn.text);
      append(ids, assistant ? 1 : 0);
      if (assistant) er.output_tokens += ids.size();
    }
    if (!instruction_closed) er.instruction_end = er.ids.size();
  } else {
    append(tok.encode(rec.instruction), 0);
    er.instruction_end = er.ids.size();
    er.ids.push_back(sp.sep);
    er.mask.push_back(0);
    const auto out = tok.encode(rec.output);
    append(out, 1);
    er.output_tokens = out.size();
  }
  er.ids.push_back(sp.eos);
  er.mask.push_back(0);
  return er;
}

Packer::Packer(const Tokenizer& tok, std::size_t length) : tok_(tok), length_(length) {
  if (length_ == 0) throw ValidationError("pack: sequence length must be positive");
}

PackedSequence Packer::seal() {
  PackedSequence seq = std::move(open_);
  open_ = PackedSequence{};
  seq.pad_count = length_ - seq.token_ids.size();
  seq.token_ids.resize(length_, tok_.specials().pad);
  seq.loss_mask.resize(length_, 0);
  ++stats_.sequences;
  return seq;
}

std::optional<PackedSequence> Packer::push(const InstructionRecord& rec) {
  ++stats_.records_in;
  EncodedRecord er;
  try {
    er = encode_record(rec, tok_);
  } catch (const std::exception&) {
    stats_.tokenizer_failures.push_back(rec.id);
    return std::nullopt;
  }
  if (er.ids.size() > length_) {
    stats_.skipped_overlong.push_back(rec.id);
    return std::nullopt;
  }
  std::optional<PackedSequence> done;
  if (open_.token_ids.size() + er.ids.size() > length_) done = seal();
  const std::size_t start = open_.token_ids.size();
  open_.token_ids.insert(open_.token_ids.end(), er.ids.begin(), er.ids.end());
  open_.loss_mask.insert(open_.loss_mask.end(), er.mask.begin(), er.mask.end());
  open_.boundaries.push_back({rec.id, start, start + er.ids.size(), start + er.instruction_end});
  ++stats_.records_packed;
  return done;
}

std::optional<PackedSequence> Packer::finish() {
  if (open_.boundaries.empty()) return std::nullopt;
  return seal();
}

PackResult pack(const std::vector<InstructionRecord>& records, const Tokenizer& tok, std::size_t length) {
  Packer packer(tok, length);
  PackResult out;
  for (const auto& rec : records) {
    if (auto seq = packer.push(rec)) out.sequences.push_back(std::move(*seq));
  }
  if (auto seq = packer.finish()) out.sequences.push_back(std::move(*seq));
  out.stats = packer.stats();
  return out;
}

MaskReport mask_stats(const std::vector<PackedSequence>& seqs) {
  MaskReport r;
  for (const auto& s : seqs) {
    ++r.sequences;
    r.total_tokens += s.token_ids.size();
    r.pad_tokens += s.pad_count;
    for (auto m : s.loss_mask) r.mask_sum += m;
    ++r.records_per_sequence[s.boundaries.size()];
  }
  r.pad_fraction = r.total_tokens ? static_cast<double>(r.pad_tokens) / static_cast<double>(r.total_tokens) : 0.0;
  return r;
}

void validate(const PackedSequence& seq, std::size_t length, const Tokenizer& tok) {
  const auto& sp = tok.specials();
  auto fail = [](const std::string& what) { throw ValidationError("packed sequence: " + what); };
  if (seq.token_ids.size() != length || seq.loss_mask.size() != length) fail("wrong length");
  std::size_t cursor = 0;
  for (const auto& b : seq.boundaries) {
    if (b.start != cursor) fail("spans are not contiguous from the start");
    if (!(b.start < b.instruction_end && b.instruction_end < b.end && b.end <= length)) fail("span out of order");
    if (seq.token_ids[b.start] != sp.bos || seq.token_ids[b.end - 1] != sp.eos) fail("span framing");
    for (std::size_t i = b.start; i < b.instruction_end; ++i) {
      if (seq.loss_mask[i]) fail("loss on instruction token");
    }
    if (seq.loss_mask[b.end - 1]) fail("loss on eos");
    cursor = b.end;
  }
  if (length - cursor != seq.pad_count) fail("pad_count mismatch");
  for (std::size_t i = cursor; i < length; ++i) {
    if (seq.token_ids[i] != sp.pad || seq.loss_mask[i]) fail("bad padding");
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (seq.loss_mask[i] > 1) fail("mask value outside {0,1}");
    if (seq.loss_mask[i] && (seq.token_ids[i] == sp.sep || seq.token_ids[i] == sp.bos || seq.token_ids[i] == sp.pad ||
                             seq.token_ids[i] == sp.user || seq.token_ids[i] == sp.assistant)) {
      fail("loss on a special token");
    }
  }
}

void to_json(nlohmann::json& j, const PackedSequence& v) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& b : v.boundaries) {
    spans.push_back({{"record_id", b.record_id}, {"start", b.start}, {"end", b.end}, {"instruction_end", b.instruction_end}});
  }
  j = nlohmann::json{{"token_ids", v.token_ids}, {"loss_mask", v.loss_mask}, {"boundaries", spans}, {"pad_count", v.pad_count}};
}

void from_json(const nlohmann::json& j, PackedSequence& v) {
  v.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
  v.loss_mask = j.at("loss_mask").get<std::vector<std::uint8_t>>();
  v.pad_count = j.at("pad_count").get<std::size_t>();
  v.boundaries.clear();
  for (const auto& b : j.at("boundaries")) {
    v.boundaries.push_back({b.at("record_id").get<std::string>(), b.at("start").get<std::size_t>(),
                            b.at("end").get<std::size_t>(), b.at("instruction_end").get<std::size_t>()});
  }
}

void to_json(nlohmann::json& j, const MaskReport& v) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, n] : v.records_per_sequence) hist[std::to_string(k)] = n;
  j = nlohmann::json{{"sequences", v.sequences},       {"total_tokens", v.total_tokens},
                     {"mask_sum", v.mask_sum},         {"pad_tokens", v.pad_tokens},
                     {"pad_fraction", v.pad_fraction}, {"records_per_sequence", hist}};
}

void to_json(nlohmann::json& j, const PackStats& v) {
  j = nlohmann::json{{"records_in", v.records_in},
                     {"records_packed", v.records_packed},
                     {"sequences", v.sequences},
                     {"skipped_overlong", v.skipped_overlong},
                     {"tokenizer_failures", v.tokenizer_failures}};
}

}  // namespace unistage
