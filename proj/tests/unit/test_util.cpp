#include <gtest/gtest.h>

#include "kolb/util/csv.hpp"
#include "kolb/util/hash.hpp"
#include "kolb/util/json_io.hpp"
#include "kolb/util/text.hpp"
#include "temp_dir.hpp"

using namespace kolb;

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(short_hash("abc"), "ba7816bf8f01");
  EXPECT_EQ(short_hash("abc", 4), "ba78");
}

TEST(Truncate, KeepsTail) {
  std::string s(100, 'a');
  s += "END";
  auto t = tail_truncate(s, 10);
  EXPECT_EQ(t.size(), 10u);
  EXPECT_EQ(t.substr(7), "END");
  EXPECT_EQ(tail_truncate("short", 10), "short");
}

TEST(Truncate, StartsOnCharacterBoundary) {
  // "é" is two bytes; a cut inside it must skip the continuation byte.
  std::string s = "xé" + std::string(8, 'b');
  auto t = tail_truncate(s, 9);
  EXPECT_EQ(t, std::string(8, 'b'));
}

TEST(Text, ParseDouble) {
  double v = 0;
  EXPECT_TRUE(parse_double("0.41", v));
  EXPECT_DOUBLE_EQ(v, 0.41);
  EXPECT_TRUE(parse_double("+3", v));
  EXPECT_DOUBLE_EQ(v, 3.0);
  EXPECT_FALSE(parse_double("3x", v));
  EXPECT_FALSE(parse_double("nan", v));
  EXPECT_FALSE(parse_double("", v));
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Text, SplitJoinTrim) {
  auto parts = split("a,b,,c", ',');
  ASSERT_EQ(parts.size(), 4u);
  EXPECT_EQ(parts[2], "");
  EXPECT_EQ(join(parts, "|"), "a|b||c");
  EXPECT_EQ(trim("  x \n"), "x");
}

TEST(Csv, QuotedFieldsRoundTrip) {
  auto t = parse_csv("id,text\n1,\"a, \"\"b\"\"\"\n2,plain\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "a, \"b\"");
  auto again = parse_csv(format_csv(t));
  EXPECT_EQ(again.rows, t.rows);
  EXPECT_EQ(*t.column("text"), 1u);
  EXPECT_FALSE(t.column("nope").has_value());
}

TEST(Csv, RejectsMalformed) {
  EXPECT_THROW(parse_csv("a,b\n1\n"), CsvError);
  EXPECT_THROW(parse_csv("a,b\n\"1,2\n"), CsvError);
}

TEST(Csv, StripsBomAndCrlf) {
  auto t = parse_csv("\xEF\xBB\xBFid,x\r\n1,2\r\n");
  EXPECT_EQ(t.header[0], "id");
  EXPECT_EQ(t.rows[0][1], "2");
}

TEST(JsonIo, CanonicalDumpSortsKeysAndSurvivesBadUtf8) {
  Json a = {{"b", 1}, {"a", 2}};
  EXPECT_EQ(canonical_dump(a), R"({"a":2,"b":1})");
  Json bad = std::string("\xff\xfe");
  EXPECT_NO_THROW(canonical_dump(bad));
}

TEST(JsonIo, JsonlRoundTrip) {
  kolb::testing::TempDir dir;
  std::vector<Json> recs = {{{"x", 1}}, {{"y", "z"}}};
  write_jsonl(dir / "sub/r.jsonl", recs);
  EXPECT_EQ(read_jsonl(dir / "sub/r.jsonl"), recs);
}
