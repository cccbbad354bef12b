#include "support.hpp"

#include "logan/error.hpp"

#include <doctest.h>

using namespace logan;

namespace {

struct ScriptFixture {
    GeneratorModel model = test::small_model(41, 14, 2, 4, 32);
    ObjectBank bank;

    ScriptFixture() {
        const auto codes = sample_codes(model, 1);
        const auto features = trace_features(model, codes, model.layer_count());
        const std::vector<int> layers{4, 7, 10};
        bank.add(extract_object(model, features, codes, test::block_mask(32, 32, 16, 4, 28, 20), "bed", layers, "bed_031"));
        bank.add(extract_object(model, features, codes, test::block_mask(32, 32, 2, 20, 10, 30), "window", layers, "win_1"));
    }

    ScriptContext ctx() const { return {model, bank}; }

    EditScript parse(const std::string& edits) const {
        return parse_edit_script(R"({"base":{"seed":7},"edits":[)" + edits + "]}", ctx());
    }

    std::string pointer_of(const std::string& text) const {
        try {
            parse_edit_script(text, ctx());
        } catch (const ParseError& e) {
            return e.pointer();
        }
        return "<none>";
    }

    std::string edit_pointer(const std::string& edits) const {
        return pointer_of(R"({"base":{"seed":7},"edits":[)" + edits + "]}");
    }
};

} // namespace

TEST_CASE("empty program") {
    ScriptFixture fx;
    const EditScript s = parse_edit_script(R"({"base":{"seed":7},"edits":[]})", fx.ctx());
    CHECK(s.edits.empty());
    CHECK(s.base.seed == 7u);
    CHECK(base_codes(fx.model, s.base) == sample_codes(fx.model, 7));
}

TEST_CASE("defaults are resolved at parse time") {
    ScriptFixture fx;
    const EditScript s = fx.parse(R"({"op":"insert","object":"bed_031"},)"
                                  R"({"op":"rotate","object":"bed_031","path":["bed_031","win_1"],"s":1,"S":3},)"
                                  R"({"op":"restyle_object","object":"win_1","style_seed":4},)"
                                  R"({"op":"global_style","style_seed":9},)"
                                  R"({"op":"shift","object":"win_1","position":[-3,2]})");
    CHECK(s.edits[0].layer == 7);
    CHECK(s.edits[0].priority == 1);
    CHECK(s.edits[0].position == std::array<int, 2>{0, 0});
    CHECK(s.edits[1].layer == 7);
    CHECK(s.edits[1].layers == LayerRange{3, 6});
    CHECK(s.edits[2].layers == LayerRange{8, 14});
    CHECK(s.edits[2].priority == 2);
    CHECK(s.edits[3].layers == LayerRange{8, 14});
    CHECK(s.edits[4].layer == 7);
    CHECK(recommended_style_range(14) == LayerRange{8, 14});
}

TEST_CASE("schema violations carry JSON pointers") {
    ScriptFixture fx;
    CHECK(fx.edit_pointer(R"({"op":"teleport"})") == "/edits/0/op");
    CHECK(fx.edit_pointer(R"({"object":"bed_031"})") == "/edits/0/op");
    CHECK(fx.edit_pointer(R"({"op":"remove","object":"bed_031"},{"op":"remove","object":"bed_031","colour":1})") ==
          "/edits/1/colour");
    CHECK(fx.edit_pointer(R"({"op":"remove","object":"bed_031","s":1})") == "/edits/0/s");
    CHECK(fx.edit_pointer(R"({"op":"shift","object":"bed_031"})") == "/edits/0/position");
    CHECK(fx.edit_pointer(R"({"op":"remove","object":"bed_031","layer":15})") == "/edits/0/layer");
    CHECK(fx.edit_pointer(R"({"op":"remove","object":"bed_031","layer":"4"})") == "/edits/0/layer");
    CHECK(fx.edit_pointer(R"({"op":"insert","object":"bed_031","layer":5})") == "/edits/0/layer");
    CHECK(fx.edit_pointer(R"({"op":"global_style","style_seed":1,"layers":[9,8]})") == "/edits/0/layers");
    CHECK(fx.edit_pointer(R"({"op":"global_style","style":[1,2]})") == "/edits/0/style");
    CHECK(fx.edit_pointer(R"({"op":"global_style"})") == "/edits/0");
    CHECK(fx.edit_pointer(R"({"op":"rotate","object":"bed_031","path":["bed_031","win_1"],"s":4,"S":3})") ==
          "/edits/0/s");
    CHECK(fx.edit_pointer(R"({"op":"insert","object":"bed_031","position":[1]})") == "/edits/0/position");
    CHECK(fx.pointer_of(R"({"edits":[]})") == "/base");
    CHECK(fx.pointer_of(R"({"base":{"seed":1,"codes":[]}})") == "/base/codes");
    CHECK(fx.pointer_of(R"({"base":{"seed":-1}})") == "/base/seed");
    CHECK(fx.pointer_of(R"({"base":{"seed":1},"extra":0})") == "/extra");
    CHECK(fx.pointer_of(R"({"base":{"seed":1},)") == "");
}

TEST_CASE("unknown objects are reference errors") {
    ScriptFixture fx;
    try {
        fx.parse(R"({"op":"insert","object":"sofa_2"})");
        FAIL("expected a reference error");
    } catch (const ReferenceError& e) {
        CHECK(e.object_id() == "sofa_2");
    }
    CHECK_THROWS_AS(fx.parse(R"({"op":"rotate","object":"bed_031","path":["bed_031","nope"],"s":0,"S":1})"),
                    ReferenceError);
}

TEST_CASE("canonical serialization") {
    ScriptFixture fx;
    const EditScript s = fx.parse(R"({"position":[1,2],"object":"bed_031","op":"insert"})");
    const std::string text = serialize_edit_script(s);
    CHECK(text.back() == '\n');
    CHECK(text.find("\"layer\": 7") != std::string::npos);
    CHECK(text.find("\"object\"") < text.find("\"op\""));
    CHECK(parse_edit_script(text, fx.ctx()) == s);
}

TEST_CASE("explicit base codes") {
    ScriptFixture fx;
    EditScript s;
    std::vector<std::vector<double>> codes;
    for (int l = 1; l <= 14; ++l) codes.push_back({0.5 * l, -1.0, 1e-12, 3.0});
    s.base.codes = codes;
    const std::string text = serialize_edit_script(s);
    const EditScript back = parse_edit_script(text, fx.ctx());
    CHECK(back == s);
    CHECK(base_codes(fx.model, back.base)[13].values[0] == 7.0);
    CHECK(base_codes(fx.model, back.base)[13].layer == 14);
}
