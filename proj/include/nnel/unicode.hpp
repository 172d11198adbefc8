// Copyright 2026 The nnel Authors.
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

#pragma once

// UTF-8 / code-point helpers backed by ICU. All offsets in this library are
// code-point offsets into NFC-normalized text.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nnel/error.hpp"

namespace nnel::unicode {

namespace detail {

inline icu::UnicodeString from_utf8_strict(std::string_view utf8) {
  if (utf8.empty()) return {};
  UErrorCode status = U_ZERO_ERROR;
  int32_t needed = 0;
  u_strFromUTF8(nullptr, 0, &needed, utf8.data(),
                static_cast<int32_t>(utf8.size()), &status);
  if (status != U_BUFFER_OVERFLOW_ERROR && U_FAILURE(status)) {
    throw ValidationError("invalid UTF-8 input");
  }
  icu::UnicodeString out;
  status = U_ZERO_ERROR;
  UChar* buf = out.getBuffer(needed);
  u_strFromUTF8(buf, needed, &needed, utf8.data(),
                static_cast<int32_t>(utf8.size()), &status);
  out.releaseBuffer(U_SUCCESS(status) ? needed : 0);
  if (U_FAILURE(status)) throw ValidationError("invalid UTF-8 input");
  return out;
}

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw RuntimeFailure("ICU NFC normalizer unavailable");
  }
  return *n;
}

inline icu::UnicodeString normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
  return out;
}

inline std::u32string to_u32(const icu::UnicodeString& s) {
  std::u32string out(static_cast<std::size_t>(s.countChar32()), U'\0');
  UErrorCode status = U_ZERO_ERROR;
  s.toUTF32(reinterpret_cast<UChar32*>(out.data()),
            static_cast<int32_t>(out.size()), status);
  if (U_FAILURE(status)) throw ValidationError("UTF-32 conversion failed");
  return out;
}

}  // namespace detail

// Strict decode + NFC; invalid UTF-8 is a ValidationError.
inline std::u32string decode_nfc(std::string_view utf8) {
  return detail::to_u32(detail::normalize(detail::from_utf8_strict(utf8)));
}

inline std::string nfc_utf8(std::string_view utf8) {
  std::string out;
  detail::normalize(detail::from_utf8_strict(utf8)).toUTF8String(out);
  return out;
}

inline std::string encode(std::u32string_view cps) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(cps.data()),
      static_cast<int32_t>(cps.size()));
  std::string out;
  s.toUTF8String(out);
  return out;
}

// Lowercased (root locale, locale-independent) NFC code points.
inline std::u32string lower_nfc(std::string_view utf8) {
  icu::UnicodeString s = detail::normalize(detail::from_utf8_strict(utf8));
  s.toLower(icu::Locale::getRoot());
  return detail::to_u32(detail::normalize(s));
}

inline std::size_t length(std::string_view utf8) {
  return detail::from_utf8_strict(utf8).countChar32();
}

// Character n-grams over code points. Text shorter than n yields one gram
// holding the whole text; empty text yields none.
inline std::vector<std::u32string> char_ngrams(std::u32string_view text,
                                               std::size_t n = 3) {
  std::vector<std::u32string> grams;
  if (text.empty()) return grams;
  if (text.size() < n) {
    grams.emplace_back(text);
    return grams;
  }
  grams.reserve(text.size() - n + 1);
  for (std::size_t i = 0; i + n <= text.size(); ++i) {
    grams.emplace_back(text.substr(i, n));
  }
  return grams;
}

}  // namespace nnel::unicode
