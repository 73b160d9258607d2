#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/motion_io.hpp"

#include "noniso/mat.hpp"
#include "noniso/rng.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace noniso;

namespace {

Motion random_motion(int frames, int joints, Rng& rng) {
    Motion m(frames, joints, 24.0);
    for (double& v : m.a) v = rng.normal();
    return m;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

} // namespace

TEST_CASE("motion files round trip through f32 storage") {
    Rng rng(1);
    const Motion m = random_motion(6, 4, rng);
    save_motion("t_motion.nimo", m);
    const Motion back = load_motion("t_motion.nimo");
    CHECK(back.frames == m.frames);
    CHECK(back.joints == m.joints);
    CHECK(back.frame_rate == doctest::Approx(24.0));
    for (size_t i = 0; i < m.a.size(); ++i)
        CHECK(back.a[i] == doctest::Approx(m.a[i]).epsilon(1e-6));

    // Storage is f32: a second write of the loaded motion is bit-identical.
    save_motion("t_motion2.nimo", back);
    CHECK(file_bytes("t_motion.nimo") == file_bytes("t_motion2.nimo"));
    std::remove("t_motion.nimo");
    std::remove("t_motion2.nimo");
}

TEST_CASE("prediction sets round trip") {
    Rng rng(2);
    PredictionSet preds;
    for (int i = 0; i < 3; ++i) preds.push_back(random_motion(4, 3, rng));
    save_prediction_set("t_preds.nipr", preds);
    const PredictionSet back = load_prediction_set("t_preds.nipr");
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back[i].frames == preds[i].frames);
        CHECK(back[i].joints == preds[i].joints);
    }
    std::remove("t_preds.nipr");
}

TEST_CASE("corrupt files are rejected with clear errors") {
    Rng rng(3);
    save_motion("t_bad.nimo", random_motion(3, 2, rng));
    std::string bytes = file_bytes("t_bad.nimo");

    { // bad magic
        std::ofstream out("t_bad.nimo", std::ios::binary);
        std::string tampered = bytes;
        tampered[0] = 'X';
        out.write(tampered.data(), static_cast<std::streamsize>(tampered.size()));
    }
    CHECK_THROWS_WITH_AS(load_motion("t_bad.nimo"), doctest::Contains("magic"), ValidationError);

    { // truncated payload
        std::ofstream out("t_bad.nimo", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    }
    CHECK_THROWS_AS(load_motion("t_bad.nimo"), ValidationError);

    { // trailing garbage
        std::ofstream out("t_bad.nimo", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out << "extra";
    }
    CHECK_THROWS_WITH_AS(load_motion("t_bad.nimo"), doctest::Contains("trailing"),
                         ValidationError);
    std::remove("t_bad.nimo");

    CHECK_THROWS_AS(load_motion("does_not_exist.nimo"), ValidationError);
}

TEST_CASE("csv round trip") {
    Rng rng(4);
    const Motion m = random_motion(3, 2, rng);
    std::stringstream buf;
    write_motion_csv(buf, m);
    const Motion back = read_motion_csv(buf);
    REQUIRE(back.frames == 3);
    REQUIRE(back.joints == 2);
    for (size_t i = 0; i < m.a.size(); ++i)
        CHECK(back.a[i] == doctest::Approx(m.a[i]).epsilon(1e-15));

    std::stringstream bad("frame,joint,x,y,z\n0,0,1.0,2.0\n");
    CHECK_THROWS_WITH_AS(read_motion_csv(bad), doctest::Contains("line 2"), ValidationError);
}
