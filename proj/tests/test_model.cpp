#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "difflab/errors.hpp"
#include "difflab/model.hpp"

using namespace difflab;

constexpr double inf = std::numeric_limits<double>::infinity();

TEST(Interval, Invariants) {
    EXPECT_THROW(Interval(1.0, 1.0), DomainError);
    EXPECT_THROW(Interval(2.0, 1.0), DomainError);
    EXPECT_THROW(Interval(-inf, 0.0, true, false), DomainError);
    const Interval i(0.0, 1.0, true, false);
    EXPECT_TRUE(i.contains(0.0));
    EXPECT_FALSE(i.contains(1.0));
    EXPECT_FALSE(i.in_interior(0.0));
    EXPECT_EQ(i.to_string(), "[0, 1)");
}

TEST(AtomMass, InfinityIsATag) {
    EXPECT_TRUE(AtomMass::infinite().is_infinite());
    EXPECT_FALSE(AtomMass::finite(1e308).is_infinite());
    EXPECT_THROW(AtomMass::finite(-1.0), DomainError);
    EXPECT_THROW(AtomMass::finite(inf), DomainError);
    EXPECT_TRUE(std::isinf(AtomMass::infinite().value()));
}

TEST(Validate, BrownianMotionIsClean) {
    EXPECT_TRUE(validate(catalog_lookup("bm")).empty());
}

TEST(Validate, VanishingSigmaReported) {
    const auto spec = make_ito("bad", "0", "x", Interval(-1.0, 1.0));
    const auto v = validate(spec);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], "sigma vanishes at interior point 0");
}

TEST(Validate, BesselIsClean) {
    EXPECT_TRUE(validate(catalog_lookup("bes3")).empty());
    const auto grid = sample_grid(Interval::positive_half_line(), 512);
    EXPECT_LT(grid.front(), 1e-10);
    EXPECT_GT(grid.back(), 1e10);
}

TEST(Validate, DomainErrorThrows) {
    const auto spec = make_ito("bad", "log(x)", "1", Interval(-1.0, 1.0));
    EXPECT_THROW(validate(spec), ExpressionError);
}

TEST(Validate, InfiniteCoefficientIsViolation) {
    const auto spec = make_ito("bad", "1/x", "1", Interval(-1.0, 1.0));
    EXPECT_FALSE(validate(spec).empty());
}

TEST(Catalog, EveryEntryValidates) {
    for (const auto& e : catalog()) EXPECT_TRUE(validate(e.spec).empty()) << e.name;
    for (double beta : {0.5, 0.75, 1.3, 3.0}) EXPECT_TRUE(validate(cev(beta)).empty()) << beta;
}

TEST(Catalog, Lookups) {
    const auto bm = catalog_lookup("bm");
    ASSERT_TRUE(bm.is_ito());
    EXPECT_TRUE(bm.ito().coefficients.drift.is_zero());
    EXPECT_EQ(bm.ito().coefficients.diffusion(3.0), 1.0);
    EXPECT_EQ(bm.domain(), Interval::real_line());

    const auto b3 = catalog_lookup("bes3");
    EXPECT_DOUBLE_EQ(b3.ito().coefficients.drift(4.0), 0.25);
    EXPECT_EQ(b3.domain(), Interval::positive_half_line());

    const auto c = catalog_lookup("cev", 2.0);
    EXPECT_EQ(c.ito().coefficients.diffusion(3.0), 9.0);
    EXPECT_TRUE(c.ito().coefficients.drift.is_zero());

    const auto absorbed = catalog_lookup("bm_absorbed");
    ASSERT_TRUE(atom_on(absorbed.atoms(), Side::Left).has_value());
    EXPECT_TRUE(atom_on(absorbed.atoms(), Side::Left)->is_infinite());
    EXPECT_TRUE(absorbed.domain().left_closed());
    EXPECT_EQ(atom_on(catalog_lookup("bm_reflected").atoms(), Side::Left)->value(), 0.0);
    EXPECT_THROW(catalog_lookup("nope"), DomainError);
}

TEST(ModelFile, AbsorbedBrownianMotion) {
    const auto spec = parse_model(R"(# absorbed at the origin
name = "absorbed"
domain = [0, "inf"]
drift = "0"
sigma = "1"

[atoms]
left = "inf"
)");
    EXPECT_EQ(spec.label(), "absorbed");
    EXPECT_TRUE(spec.domain().left_closed());
    EXPECT_TRUE(std::isinf(spec.domain().right()));
    EXPECT_TRUE(atom_on(spec.atoms(), Side::Left)->is_infinite());
}

TEST(ModelFile, DottedKeysAndScaleSpeed) {
    const auto spec = parse_model("domain = [\"-inf\", inf]\nscale = \"x\"\nspeed_density = \"1\"\n");
    ASSERT_FALSE(spec.is_ito());
    EXPECT_TRUE(spec.direct().natural);
    const auto sticky = parse_model("domain = [0, inf]\nsigma = \"1\"\natoms.left = 0.5\nclosed = \"left\"\n");
    EXPECT_EQ(atom_on(sticky.atoms(), Side::Left)->value(), 0.5);
}

TEST(ModelFile, ErrorsNameTheLine) {
    try {
        parse_model("domain = [0, 1]\nsigma = \"x +\"\n", "m.toml");
        FAIL();
    } catch (const ModelFileError& e) {
        EXPECT_NE(std::string(e.what()).find("m.toml:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_model("domain = [1, 0]\nsigma = \"1\"\n"), ModelFileError);
    EXPECT_THROW(parse_model("domain = [0, 1]\nsigma = \"1\"\ncolour = \"red\"\n"), ModelFileError);
    EXPECT_THROW(parse_model("sigma = \"1\"\n"), ModelFileError);
    EXPECT_THROW(parse_model("domain = [0, 1]\nsigma = \"1\"\natoms.left = -1\n"), ModelFileError);
}
