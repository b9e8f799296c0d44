#include "doctest.h"

#include "dcs/tokenizer.hpp"

using dcs::tokenize;
using V = std::vector<std::string>;

TEST_CASE("camelCase and acronym runs split") {
  CHECK(tokenize("XMLDocument") == V{"xml", "document"});
  CHECK(tokenize("getArrayUtil") == V{"get", "array", "util"});
  CHECK(tokenize("parseHTTPResponse") == V{"parse", "http", "response"});
  CHECK(tokenize("GlideRecordUtil") == V{"glide", "record", "util"});
}

TEST_CASE("separators and snake_case") {
  CHECK(tokenize("snake_case_name") == V{"snake", "case", "name"});
  CHECK(tokenize("a.b(c, d);") == V{"a", "b", "c", "d"});
  CHECK(tokenize("  \n\t ").empty());
  CHECK(tokenize("").empty());
}

TEST_CASE("letter-digit transitions stay whole") {
  CHECK(tokenize("parm1") == V{"parm1"});
  CHECK(tokenize("sha256Hash") == V{"sha256", "hash"});
}

TEST_CASE("utf-8 bytes are word characters") {
  const auto t = tokenize("caf\xc3\xa9 ok");
  REQUIRE(t.size() == 2);
  CHECK(t[0] == "caf\xc3\xa9");
}

TEST_CASE("identifiers keep case and dollar signs") {
  const auto ids = dcs::split_identifiers("var $x = new Foo_bar(1);");
  REQUIRE(ids.size() == 5);
  CHECK(ids[1] == "$x");
  CHECK(ids[3] == "Foo_bar");
}

TEST_CASE("split_lines drops one trailing newline only") {
  CHECK(dcs::split_lines("a\nb\n").size() == 2);
  CHECK(dcs::split_lines("a\n\n").size() == 2);
  CHECK(dcs::split_lines("").empty());
  CHECK(dcs::is_blank(" \t"));
  CHECK_FALSE(dcs::is_blank(" x "));
}

TEST_CASE("whole identifier matching") {
  CHECK(dcs::contains_identifier("var u = new ArrayUtil();", "ArrayUtil"));
  CHECK(dcs::contains_identifier("new arrayutil()", "ArrayUtil"));
  CHECK_FALSE(dcs::contains_identifier("var arrayOfUtils = 1;", "ArrayUtil"));
  CHECK_FALSE(dcs::contains_identifier("ArrayUtilHelper.x()", "ArrayUtil"));
  CHECK_FALSE(dcs::contains_identifier("my_ArrayUtil", "ArrayUtil"));
}
