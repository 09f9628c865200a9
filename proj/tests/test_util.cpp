// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <span>

#include <gtest/gtest.h>

#include "biasaudit/util/error.hpp"
#include "biasaudit/util/hash.hpp"
#include "biasaudit/util/rng.hpp"
#include "biasaudit/util/text.hpp"

namespace ba = biasaudit;
namespace text = biasaudit::text;

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(ba::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(ba::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Fnv1aAndSplitmixVectors) {
  EXPECT_EQ(ba::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(ba::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(ba::splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, Mt19937TenThousandthOutputMatches) {
  // The 10000th output for the default seed is fixed by the standard.
  std::mt19937_64 e;
  e.discard(9999);
  EXPECT_EQ(e(), 9981545732273789042ULL);
  ba::Rng r(5489u);
  for (int i = 0; i < 9999; ++i) r.next();
  EXPECT_EQ(r.next(), 9981545732273789042ULL);
}

TEST(Rng, UniformIndexStaysInRange) {
  ba::Rng r(1);
  for (std::uint64_t n : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL})
    for (int i = 0; i < 2000; ++i) EXPECT_LT(r.uniform_index(n), n);
}

TEST(Rng, ShuffleVisitsEveryPermutationEvenly) {
  // 4 items, 24 orders, 240000 draws; chi-square against uniform with 23
  // degrees of freedom stays under its 0.999 quantile (49.73).
  ba::Rng r(42);
  std::map<std::vector<int>, int> freq;
  const int draws = 240000;
  for (int i = 0; i < draws; ++i) {
    std::vector<int> v{0, 1, 2, 3};
    r.shuffle(std::span<int>(v));
    ++freq[v];
  }
  ASSERT_EQ(freq.size(), 24u);
  const double expected = draws / 24.0;
  double chi2 = 0.0;
  for (const auto& [perm, n] : freq) chi2 += (n - expected) * (n - expected) / expected;
  EXPECT_LT(chi2, 49.73);
}

TEST(Rng, SameSeedSameStream) {
  ba::Rng a(ba::mix_seed({1, 2, 3})), b(ba::mix_seed({1, 2, 3})), c(ba::mix_seed({1, 2, 4}));
  bool differs = false;
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Text, WholeWordMatching) {
  EXPECT_EQ(text::find_whole_word("The nurse met the Nurse.", "nurse"), (std::vector<std::size_t>{4, 18}));
  EXPECT_TRUE(text::find_whole_word("nurses", "nurse").empty());
  EXPECT_TRUE(text::contains_whole_word("(b) doctor", "doctor"));
  EXPECT_EQ(text::replace_whole_word("he said he was here", "he", "she"), "she said she was here");
}

TEST(Text, LongerPhraseShadowsItsTail) {
  const auto m = text::find_phrases("The construction worker left.", {"worker", "construction worker"});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].candidate, 1u);
}

TEST(Text, RenderAndMatchAreInverse) {
  const std::string tmpl = "Context: {sentence}\nQuestion: {question}";
  const std::string out = text::render(tmpl, {{"sentence", "A b."}, {"question", "Who?"}});
  EXPECT_EQ(out, "Context: A b.\nQuestion: Who?");
  const auto caps = text::match_template(tmpl, out);
  ASSERT_TRUE(caps);
  EXPECT_EQ((*caps)[0].second, "A b.");
  EXPECT_EQ((*caps)[1].second, "Who?");
  EXPECT_FALSE(text::match_template(tmpl, "Something else"));
  EXPECT_THROW(text::render("{missing}", {}), ba::Error);
}
