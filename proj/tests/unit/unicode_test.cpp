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

#include "nnel/unicode.hpp"

#include <gtest/gtest.h>

#include "nnel/error.hpp"

namespace nnel {
namespace {

TEST(Unicode, ComposesToNfc) {
  // "e" + COMBINING ACUTE ACCENT -> U+00E9.
  const auto cps = unicode::decode_nfc("caf\x65\xcc\x81");
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[3], U'é');
  EXPECT_EQ(unicode::nfc_utf8("caf\x65\xcc\x81"), "caf\xc3\xa9");
}

TEST(Unicode, LengthCountsCodePoints) {
  EXPECT_EQ(unicode::length("рак"), 3u);
  EXPECT_EQ(unicode::length(""), 0u);
}

TEST(Unicode, LowercasesCyrillicAndLatin) {
  EXPECT_EQ(unicode::encode(unicode::lower_nfc("РАК Lung")), "рак lung");
}

TEST(Unicode, RejectsInvalidUtf8) {
  EXPECT_THROW(unicode::decode_nfc("bad \xff byte"), ValidationError);
}

TEST(Unicode, CharNgrams) {
  const auto grams = unicode::char_ngrams(U"abcd", 3);
  ASSERT_EQ(grams.size(), 2u);
  EXPECT_EQ(grams[0], U"abc");
  EXPECT_EQ(grams[1], U"bcd");
  // Shorter than n: the whole text is one gram.
  ASSERT_EQ(unicode::char_ngrams(U"ab", 3).size(), 1u);
  EXPECT_TRUE(unicode::char_ngrams(U"", 3).empty());
}

TEST(Unicode, EncodeRoundTrip) {
  const std::string s = "резекция бронха";
  EXPECT_EQ(unicode::encode(unicode::decode_nfc(s)), s);
}

}  // namespace
}  // namespace nnel
