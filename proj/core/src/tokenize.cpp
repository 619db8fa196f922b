// Copyright 2026 The tailknn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tailknn/corpus.hpp"

namespace tailknn::corpus {
namespace {

enum class CharClass { kSpace, kWord, kSymbol };

// Unicode White_Space property.
bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Punctuation and symbol ranges outside ASCII that split words. Everything
// else above U+007F is treated as a word character, which covers letters and
// digits of all scripts without a full property table.
bool is_extended_symbol(char32_t c) {
  if (c >= 0xA1 && c <= 0xBF) return c != 0xAA && c != 0xB2 && c != 0xB3 && c != 0xB5 &&
                                     c != 0xB9 && c != 0xBA && c != 0xBC && c != 0xBD && c != 0xBE;
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2010 && c <= 0x2027) return true;
  if (c >= 0x2030 && c <= 0x205E) return true;
  if (c >= 0x20A0 && c <= 0x20CF) return true;  // currency
  if (c >= 0x2190 && c <= 0x23FF) return true;  // arrows, math, technical
  if (c >= 0x2500 && c <= 0x27BF) return true;  // boxes, shapes, dingbats
  if (c >= 0x3001 && c <= 0x3003) return true;
  if (c >= 0x3008 && c <= 0x3011) return true;
  if (c >= 0xFF01 && c <= 0xFF0F) return true;
  return false;
}

CharClass classify(char32_t c) {
  if (is_space(c)) return CharClass::kSpace;
  if (c < 0x80) {
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (alnum) return CharClass::kWord;
    return c < 0x20 || c == 0x7F ? CharClass::kSpace : CharClass::kSymbol;
  }
  if (c < 0xA0) return CharClass::kSpace;  // C1 controls
  return is_extended_symbol(c) ? CharClass::kSymbol : CharClass::kWord;
}

// Decodes one codepoint starting at text[pos]; returns its byte length.
std::size_t decode(std::string_view text, std::size_t pos, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  std::size_t len;
  char32_t cp;
  if (b0 < 0x80) {
    out = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    throw std::invalid_argument(fmt::format("invalid UTF-8 lead byte at offset {}", pos));
  }
  if (pos + len > text.size()) {
    throw std::invalid_argument(fmt::format("truncated UTF-8 sequence at offset {}", pos));
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) {
      throw std::invalid_argument(fmt::format("invalid UTF-8 continuation at offset {}", pos + i));
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    throw std::invalid_argument(fmt::format("invalid UTF-8 codepoint at offset {}", pos));
  }
  out = cp;
  return len;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t word_start = std::string_view::npos;
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t len = decode(text, pos, cp);
    const CharClass cls = classify(cp);
    if (cls == CharClass::kWord) {
      if (word_start == std::string_view::npos) word_start = pos;
    } else {
      if (word_start != std::string_view::npos) {
        tokens.emplace_back(text.substr(word_start, pos - word_start));
        word_start = std::string_view::npos;
      }
      if (cls == CharClass::kSymbol) tokens.emplace_back(text.substr(pos, len));
    }
    pos += len;
  }
  if (word_start != std::string_view::npos) tokens.emplace_back(text.substr(word_start));
  return tokens;
}

}  // namespace tailknn::corpus
