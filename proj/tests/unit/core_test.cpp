#include <gtest/gtest.h>

#include <random>

#include "mkg/core.hpp"
#include "test_support.hpp"

using namespace mkg;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no mkg::Error thrown";
    return ErrorCode::ContractViolation;
}

} // namespace

TEST(NormalizeEntityKey, FoldsCaseAndWhitespace) {
    EXPECT_EQ(normalize_entity_key("Fourth  Nerve Palsy "), "fourth nerve palsy");
    EXPECT_EQ(normalize_entity_key("diplopia"), "diplopia");
    EXPECT_EQ(normalize_entity_key("Cylindrical power"), "cylindrical power");
}

TEST(NormalizeEntityKey, AppliesCompatibilityFolding) {
    // full-width letters and a no-break space
    EXPECT_EQ(normalize_entity_key("\xEF\xBC\xA4iplopia\xC2\xA0Test"), "diplopia test");
}

TEST(NormalizeEntityKey, RejectsBlank) {
    EXPECT_EQ(code_of([] { normalize_entity_key(""); }), ErrorCode::InvalidEntity);
    EXPECT_EQ(code_of([] { normalize_entity_key(" \t\n"); }), ErrorCode::InvalidEntity);
}

TEST(NormalizeEntityKey, IsIdempotentOnRandomInput) {
    std::mt19937 rng(7);
    const std::string alphabet = "aBcD eF\tGh  IJ\xC3\x89";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        int len = 1 + static_cast<int>(rng() % 20);
        for (int j = 0; j < len; ++j) s.push_back(alphabet[rng() % (alphabet.size() - 2)]);
        s += "x";
        auto once = normalize_entity_key(s);
        EXPECT_EQ(normalize_entity_key(once), once) << s;
        EXPECT_EQ(once.find("  "), std::string::npos);
    }
}

TEST(TripleText, Concatenates) {
    Triple t{"diplopia", "may_be_caused_by", "fourth nerve palsy", "diplopia", "ENG"};
    EXPECT_EQ(triple_to_text(t), "diplopia may_be_caused_by fourth nerve palsy");
    EXPECT_EQ(triple_to_text({"A", "r", "B", "", ""}), "A r B");
    Triple u = t;
    EXPECT_EQ(triple_to_text(t), triple_to_text(u));
}

TEST(Question, ValidatesLabels) {
    auto q = test::make_question("stem", {"a", "b", "c"}, 'B');
    EXPECT_NO_THROW(validate(q));
    EXPECT_EQ(q.labels(), (std::vector<char>{'A', 'B', 'C'}));

    auto gap = q;
    gap.options[1].label = 'C';
    gap.options[2].label = 'D';
    EXPECT_EQ(code_of([&] { validate(gap); }), ErrorCode::InvalidQuestion);

    auto bad_gold = q;
    bad_gold.gold = 'D';
    EXPECT_EQ(code_of([&] { validate(bad_gold); }), ErrorCode::InvalidQuestion);

    auto blank = q;
    blank.stem = "   ";
    EXPECT_EQ(code_of([&] { validate(blank); }), ErrorCode::InvalidQuestion);

    auto no_options = test::make_question("stem", {});
    EXPECT_NO_THROW(validate(no_options));
}

TEST(Question, FormatsOptions) {
    auto q = test::make_question("stem", {"one", "two"});
    EXPECT_EQ(format_options(q), "A) one\nB) two");
}

TEST(AnswerValue, ChoiceString) {
    EXPECT_EQ((Answer{'B', "x"}).choice_string(), "B");
    EXPECT_EQ((Answer{std::nullopt, "x"}).choice_string(), "Uncertain");
    EXPECT_TRUE((Answer{std::nullopt, ""}).uncertain());
}

TEST(ErrorType, CarriesCodeAndDetail) {
    Error e(ErrorCode::CacheCorrupt, "bad line", "17");
    EXPECT_EQ(e.code(), ErrorCode::CacheCorrupt);
    EXPECT_EQ(e.detail(), "17");
    EXPECT_NE(std::string(e.what()).find("bad line"), std::string::npos);
}
