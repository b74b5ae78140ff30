// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "unistage/text.hpp"

using namespace unistage;

namespace {

std::vector<std::string> pieces(std::string_view text, const std::vector<CharSpan>& spans) {
  std::vector<std::string> out;
  for (const auto& s : spans) out.emplace_back(text.substr(s.start, s.size()));
  return out;
}

}  // namespace

TEST_CASE("utf8 decoding reports offsets and replaces invalid bytes") {
  const auto cps = decode_utf8("a中\xff" "b");
  REQUIRE(cps.size() == 4);
  CHECK(cps[0].value == U'a');
  CHECK(cps[1].value == U'中');
  CHECK(cps[1].offset == 1);
  CHECK(cps[1].length == 3);
  CHECK(cps[2].value == 0xFFFD);
  CHECK(cps[2].length == 1);
  CHECK(cps[3].offset == 5);
  CHECK(count_code_points("中文ab") == 4);
  std::string s;
  append_utf8(s, U'😀');
  CHECK(s == "\xF0\x9F\x98\x80");
}

TEST_CASE("unigram tokenizer splits CJK per character and Latin per word") {
  UnigramTokenizer tok;
  CHECK(tok.tokenize("高血压 is Common, ok?") ==
        std::vector<std::string>{"高", "血", "压", "is", "common", "ok"});
  CHECK(tok.count("高血压 is Common, ok?") == 6);
  CHECK(tok.tokenize("，。！").empty());
  UnigramTokenizer raw(Normalization::none);
  CHECK(raw.tokenize("Common") == std::vector<std::string>{"Common"});
  // Fullwidth letters fold to ASCII under the default normalization.
  CHECK(tok.tokenize("ＡＢＣ") == std::vector<std::string>{"abc"});
}

TEST_CASE("language detection") {
  CHECK(detect_language("高血压患者") == Language::zh);
  CHECK(detect_language("hypertension patients") == Language::en);
  CHECK(detect_language("12345 !!!") == Language::other);
}

TEST_CASE("normalization names") {
  CHECK(parse_normalization(to_string(Normalization::none)) == Normalization::none);
  CHECK(parse_normalization(to_string(Normalization::lowercase_fold)) == Normalization::lowercase_fold);
  CHECK_THROWS(parse_normalization("upper"));
}

TEST_CASE("sentence splitter tiles the text") {
  RuleSentenceSplitter sp;
  const std::string text = "第一句。第二句！Third one. Dr. Smith agreed. Fourth?\n尾巴";
  const auto spans = sp.split(text);
  std::size_t at = 0;
  for (const auto& s : spans) {
    CHECK(s.start == at);
    at = s.end;
  }
  CHECK(at == text.size());
  CHECK(pieces(text, spans) ==
        std::vector<std::string>{"第一句。", "第二句！", "Third one. ", "Dr. Smith agreed. ", "Fourth?\n", "尾巴"});
}

TEST_CASE("periods inside numbers and after initials do not split") {
  RuleSentenceSplitter sp;
  const std::string text = "The dose is 2.5 mg daily. J. Smith wrote it.";
  CHECK(pieces(text, sp.split(text)) ==
        std::vector<std::string>{"The dose is 2.5 mg daily. ", "J. Smith wrote it."});
}

TEST_CASE("closing quotes stay with their sentence") {
  RuleSentenceSplitter sp;
  const std::string text = "他说：“好。”然后走了。";
  CHECK(pieces(text, sp.split(text)) == std::vector<std::string>{"他说：“好。”", "然后走了。"});
}

TEST_CASE("empty text has no sentences") {
  RuleSentenceSplitter sp;
  CHECK(sp.split("").empty());
}
