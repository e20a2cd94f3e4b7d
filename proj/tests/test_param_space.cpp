#include <gtest/gtest.h>

#include <cstdint>
#include <string>

#include "autotune/doe_sampling.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"
#include "autotune/tuner_core.hpp"

using namespace autotune;

namespace {

ConfigurationSpace spark() { return load_space(AUTOTUNE_DATA_DIR "/spark_space.json"); }

ConfigurationSpace fraction_space() {
  return ConfigurationSpace("f", {ParameterSpec::real("spark.memory.fraction", 0.1, 0.9, 0.6)});
}

}  // namespace

TEST(ParameterSpec, RejectsInvertedBounds) {
  EXPECT_THROW(ParameterSpec::real("x", 1.0, 1.0, 1.0), SpaceError);
  EXPECT_THROW(ParameterSpec::integer("n", 5, 2, 3), SpaceError);
}

TEST(ParameterSpec, RejectsDefaultOutsideBounds) {
  EXPECT_THROW(ParameterSpec::real("x", 0.0, 1.0, 2.0), SpaceError);
  EXPECT_THROW(ParameterSpec::categorical("c", {"a", "b"}, "z"), SpaceError);
}

TEST(ParameterSpec, CategoricalNeedsTwoDistinctLabels) {
  EXPECT_THROW(ParameterSpec::categorical("c", {"a"}, "a"), SpaceError);
  EXPECT_THROW(ParameterSpec::categorical("c", {"a", "a"}, "a"), SpaceError);
}

TEST(ParameterSpec, BooleanIsFalseTrueCategorical) {
  const auto b = ParameterSpec::boolean("flag", false);
  EXPECT_EQ(b.categories, (std::vector<std::string>{"false", "true"}));
  EXPECT_EQ(encode_value(b, Value{true}), 1.0);
  EXPECT_EQ(encode_value(b, Value{false}), 0.0);
}

TEST(ConfigurationSpace, RejectsDuplicateNamesAndEmpty) {
  EXPECT_THROW(ConfigurationSpace("s", {}), SpaceError);
  EXPECT_THROW(ConfigurationSpace("s", {ParameterSpec::real("x", 0, 1, 0.5),
                                        ParameterSpec::real("x", 0, 2, 0.5)}),
               SpaceError);
}

TEST(Validate, DocumentedDefaultIsInBounds) {
  const auto s = fraction_space();
  EXPECT_TRUE(validate(s, Configuration{{0.6}}).ok());
}

TEST(Validate, BoundsAreInclusive) {
  const auto s = fraction_space();
  EXPECT_TRUE(validate(s, Configuration{{0.1}}).ok());
  EXPECT_TRUE(validate(s, Configuration{{0.9}}).ok());
}

TEST(Validate, ReportsOneViolationPerOffendingParameter) {
  const auto s = fraction_space();
  const auto r = validate(s, Configuration{{1.5}});
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].param, "spark.memory.fraction");
  EXPECT_EQ(r.violations[0].value, "1.5");
  EXPECT_EQ(r.violations[0].bound, "[0.1, 0.9]");
  EXPECT_FALSE(r.structural_error);
}

TEST(Validate, DimensionMismatchIsStructural) {
  const auto s = fraction_space();
  const auto r = validate(s, Configuration{{0.5, 0.5}});
  EXPECT_TRUE(r.structural_error);
  EXPECT_TRUE(r.violations.empty());
}

TEST(Validate, WrongValueTypeIsAViolationNotACrash) {
  const auto s = spark();
  auto c = default_configuration(s);
  c[0] = Value{std::string("four")};
  c[9] = Value{std::string("zstd")};
  const auto r = validate(s, c);
  EXPECT_EQ(r.violations.size(), 2u);
}

TEST(DefaultConfiguration, MatchesBundledSparkDefaults) {
  const auto s = spark();
  const auto c = default_configuration(s);
  ASSERT_EQ(s.dimension(), 13u);
  EXPECT_EQ(std::get<std::int64_t>(c[*s.index_of("spark.executor.cores")]), 4);
  EXPECT_EQ(std::get<std::int64_t>(c[*s.index_of("spark.executor.memory")]), 1024);
  EXPECT_EQ(std::get<double>(c[*s.index_of("spark.memory.fraction")]), 0.6);
  EXPECT_EQ(std::get<std::string>(c[*s.index_of("spark.serializer")]), "JavaSerializer");
  EXPECT_EQ(std::get<std::string>(c[*s.index_of("spark.io.compression.codec")]), "lz4");
  EXPECT_TRUE(validate(s, c).ok());
}

TEST(DefaultConfiguration, SingleBoolean) {
  const ConfigurationSpace s("b", {ParameterSpec::boolean("flag", false)});
  EXPECT_EQ(default_configuration(s), Configuration{{false}});
}

TEST(Encode, CategoryIndexInDeclarationOrder) {
  const auto s = spark();
  auto c = default_configuration(s);
  const auto e = encode(s, c);
  EXPECT_EQ(e[*s.index_of("spark.io.compression.codec")], 0.0);
  c[*s.index_of("spark.io.compression.codec")] = Value{std::string("snappy")};
  EXPECT_EQ(encode(s, c)[*s.index_of("spark.io.compression.codec")], 2.0);
}

TEST(Encode, RoundTripOnRandomConfigurations) {
  const auto s = spark();
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_configuration(s, rng);
    ASSERT_TRUE(validate(s, c).ok());
    ASSERT_EQ(decode(s, encode(s, c)), c);
  }
}

TEST(Encode, RoundTripExhaustiveOnSmallDiscreteSpace) {
  const ConfigurationSpace s("small", {ParameterSpec::integer("n", -2, 2, 0),
                                       ParameterSpec::boolean("b", true),
                                       ParameterSpec::categorical("c", {"x", "y", "z"}, "y")});
  int count = 0;
  for (std::int64_t n = -2; n <= 2; ++n)
    for (bool b : {false, true})
      for (const char* c : {"x", "y", "z"}) {
        const Configuration cfg{{n, b, std::string(c)}};
        EXPECT_EQ(decode(s, encode(s, cfg)), cfg);
        ++count;
      }
  EXPECT_EQ(count, 30);
}

TEST(Decode, RoundsIntegersHalfAwayFromZeroAndClamps) {
  const ConfigurationSpace s("i", {ParameterSpec::integer("n", -5, 5, 0)});
  EXPECT_EQ(std::get<std::int64_t>(decode(s, std::vector<double>{2.5})[0]), 3);
  EXPECT_EQ(std::get<std::int64_t>(decode(s, std::vector<double>{-2.5})[0]), -3);
  EXPECT_EQ(std::get<std::int64_t>(decode(s, std::vector<double>{9.0})[0]), 5);
}

TEST(SpaceFile, RoundTripsThroughJson) {
  const auto s = spark();
  const auto again = space_from_json(space_to_json(s));
  EXPECT_EQ(again.names(), s.names());
  EXPECT_EQ(default_configuration(again), default_configuration(s));
}

TEST(SpaceFile, RejectsUnknownKindAndUnknownField) {
  EXPECT_THROW(space_from_json(nlohmann::json::parse(
                   R"({"parameters":[{"name":"x","kind":"complex","default":1}]})")),
               SpaceError);
  EXPECT_THROW(space_from_json(nlohmann::json::parse(
                   R"({"parameters":[{"name":"x","kind":"real","lower":0,"upper":1,
                       "default":0.5,"step":0.1}]})")),
               SpaceError);
}

TEST(SpaceFile, MissingFileIsASpaceError) {
  EXPECT_THROW(load_space("/nonexistent/space.json"), SpaceError);
}

TEST(ConfigJson, ArrayAndObjectForms) {
  const auto s = spark();
  const auto c = default_configuration(s);
  EXPECT_EQ(config_from_json(s, config_to_json(c)), c);
  const auto obj = config_to_object(s, c);
  EXPECT_EQ(obj["spark.executor.cores"], 4);
  EXPECT_EQ(obj["spark.serializer"], "JavaSerializer");
}
