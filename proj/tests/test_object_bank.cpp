#include "support.hpp"

#include "logan/error.hpp"

#include <doctest.h>

#include <fstream>

using namespace logan;

namespace {

struct BankFixture {
    GeneratorModel model = test::small_model(31, 8, 3, 4, 32);
    std::vector<LatentCode> codes = sample_codes(model, 2);
    std::vector<FeatureMap> features = trace_features(model, codes, model.layer_count());

    ObjectAsset asset(const std::string& id, const RegionMask& mask, const std::string& category = "bed") const {
        const std::vector<int> layers{2, 4, 5};
        return extract_object(model, features, codes, mask, category, layers, id);
    }
};

} // namespace

TEST_CASE("extraction keeps features, codes and a quantized mask") {
    BankFixture fx;
    RegionMask m = test::block_mask(32, 32, 4, 4, 12, 20);
    m.at(4, 4) = 0.3f;
    const ObjectAsset a = fx.asset("bed_1", m);
    CHECK(a.priority == 1);
    CHECK(a.layers() == std::vector<int>{2, 4, 5});
    CHECK(a.features.at(4) == fx.features[3]);
    CHECK(a.codes == fx.codes);
    CHECK(a.mask.at(4, 4) == doctest::Approx(77.0 / 255.0));
    CHECK(a.bbox() == BoundingBox{4, 4, 19, 11});
    CHECK_THROWS_AS(fx.asset("bad", RegionMask(32, 32)), Error);
    CHECK_THROWS_AS(fx.asset("bad", test::block_mask(16, 16, 0, 0, 4, 4)), Error);
}

TEST_CASE("transforms shift placement and round-trip exactly") {
    BankFixture fx;
    const ObjectAsset a = fx.asset("bed_1", test::block_mask(32, 32, 8, 8, 16, 16));
    const ObjectAsset moved = transform_asset(a, 8, -4);
    CHECK(moved.bbox() == BoundingBox{16, 4, 23, 11});
    CHECK(moved.placed_mask() == test::block_mask(32, 32, 4, 16, 12, 24));
    // Layer 4 runs at 8x8: an 8 px shift is 2 cells, -4 px is -1 cell.
    const FeatureMap f = moved.placed_features(4);
    const FeatureMap& src = a.features.at(4);
    CHECK(f.at(0, 2, 4) == src.at(0, 3, 2));
    CHECK(f.at(1, 7, 0) == 0.0f);
    CHECK(transform_asset(moved, -8, 4) == a);
    CHECK_THROWS_AS(transform_asset(a, 20, 0), Error);
    CHECK_THROWS_AS(transform_asset(a, 0, -9), Error);
}

TEST_CASE("bank membership") {
    BankFixture fx;
    ObjectBank bank;
    bank.add(fx.asset("bed_1", test::block_mask(32, 32, 0, 0, 8, 8)));
    CHECK_THROWS_AS(bank.add(fx.asset("bed_1", test::block_mask(32, 32, 0, 0, 8, 8))), Error);
    CHECK_THROWS_AS(bank.add(fx.asset("bad id", test::block_mask(32, 32, 0, 0, 8, 8))), Error);
    CHECK_THROWS_AS(bank.at("sofa"), ReferenceError);
    bank.add(fx.asset("lamp_1", test::block_mask(32, 32, 0, 0, 8, 8), "lamp"));
    CHECK(bank.by_category("lamp").size() == 1);
    CHECK(bank.remove("lamp_1"));
    CHECK_FALSE(bank.remove("lamp_1"));
    CHECK(same_content(bank.at("bed_1"), fx.asset("other", test::block_mask(32, 32, 0, 0, 8, 8))));
}

TEST_CASE("persistence") {
    BankFixture fx;
    test::TempDir dir;
    SUBCASE("empty bank") {
        persist_bank(ObjectBank{}, dir.path);
        CHECK(load_bank(dir.path).empty());
    }
    SUBCASE("lossless, with stale blobs removed") {
        ObjectBank bank;
        bank.add(fx.asset("bed_1", test::block_mask(32, 32, 2, 2, 9, 30)));
        bank.add(transform_asset(fx.asset("win_1", test::block_mask(32, 32, 0, 0, 5, 5), "window"), 3, 3));
        persist_bank(bank, dir.path);
        CHECK(load_bank(dir.path) == bank);
        bank.remove("win_1");
        persist_bank(bank, dir.path);
        CHECK(load_bank(dir.path) == bank);
        int files = 0;
        for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path)) ++files;
        CHECK(files == 4);
    }
    SUBCASE("truncated blob names the asset") {
        ObjectBank bank;
        bank.add(fx.asset("bed_1", test::block_mask(32, 32, 2, 2, 9, 30)));
        persist_bank(bank, dir.path);
        for (const auto& e : std::filesystem::directory_iterator(dir.path)) {
            if (e.path().extension() == ".f64") std::filesystem::resize_file(e.path(), 8);
        }
        try {
            load_bank(dir.path);
            FAIL("expected corruption");
        } catch (const CorruptionError& e) {
            CHECK(e.asset_id() == "bed_1");
        }
    }
    SUBCASE("future version") {
        persist_bank(ObjectBank{}, dir.path);
        write_file_atomic(dir.path / "manifest.json",
                          std::string_view(R"({"format":"logan-bank","version":2,"assets":[]})"));
        try {
            load_bank(dir.path);
            FAIL("expected a version error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Version);
        }
    }
}

TEST_CASE("pose clustering edge cases") {
    std::vector<ObjectAsset> assets;
    for (int i = 0; i < 3; ++i) {
        ObjectAsset a;
        a.id = "b" + std::to_string(i);
        a.category = "bed";
        a.mask = test::block_mask(16, 16, 0, 5 * i, 16, 5 * i + 5);
        a.codes = {LatentCode{1, {double(i)}}};
        assets.push_back(a);
    }
    std::vector<const ObjectAsset*> ptrs{&assets[0], &assets[1], &assets[2]};
    const PoseClusterModel m = cluster_poses(ptrs, 3, {8, 8}, 1);
    CHECK(m.inertia == doctest::Approx(0.0));
    CHECK(m.centers.size() == 3);
    CHECK(std::is_sorted(m.centers.begin(), m.centers.end()));
    CHECK_THROWS_AS(cluster_poses(ptrs, 4, {8, 8}, 1), Error);
    CHECK_THROWS_AS(cluster_poses(ptrs, 1, {8, 8}, 1), Error);

    const RotationPath same = rotation_path(1, 1, 4, m);
    for (const auto& codes : same.codes) CHECK(codes == same.codes.front());
    CHECK_THROWS_AS(rotation_path(0, 3, 4, m), Error);
    CHECK_THROWS_AS(rotation_path(0, 1, 0, m), Error);
}
