#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "locfdrn/errors.hpp"
#include "locfdrn/table_io.hpp"
#include "test_support.hpp"

using namespace locfdrn;
using Catch::Approx;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("z-score tables") {
    const auto dir = testing::temp_dir("io_z");
    write_file(dir / "z.tsv", "id\tz\textra\nrs1\t1.5\tx\nrs2\t-0.25\ty\n\n");
    const auto t = read_z_tsv((dir / "z.tsv").string());
    CHECK(t.ids == std::vector<std::string>{"rs1", "rs2"});
    CHECK(t.z == std::vector<double>{1.5, -0.25});

    write_z_tsv((dir / "out.tsv").string(), t);
    const auto back = read_z_tsv((dir / "out.tsv").string());
    CHECK(back.z == t.z);
    CHECK(back.ids == t.ids);

    write_file(dir / "bad.tsv", "id\tz\nrs1\tabc\n");
    CHECK_THROWS_AS(read_z_tsv((dir / "bad.tsv").string()), ArgumentError);
    write_file(dir / "nocol.tsv", "id\tscore\nrs1\t1\n");
    CHECK_THROWS_AS(read_z_tsv((dir / "nocol.tsv").string()), ArgumentError);
    CHECK_THROWS_AS(read_z_tsv((dir / "none.tsv").string()), ArgumentError);
}

TEST_CASE("summary statistics and design files") {
    const auto dir = testing::temp_dir("io_design");
    write_file(dir / "s.tsv", "id\tbeta\tse\na\t0.2\t0.1\nb\t-0.3\t0.15\n");
    const auto s = read_summary_tsv((dir / "s.tsv").string());
    CHECK(s.beta == std::vector<double>{0.2, -0.3});
    CHECK(s.se == std::vector<double>{0.1, 0.15});

    write_file(dir / "x.csv", "snp1,snp2\n0,1\nNA,2\n2,NA\n");
    const auto d = read_design_csv((dir / "x.csv").string());
    CHECK(d.columns == std::vector<std::string>{"snp1", "snp2"});
    CHECK(d.X.rows() == 3);
    CHECK(std::isnan(d.X(1, 0)));
    CHECK(d.X(2, 0) == 2.0);

    write_file(dir / "y.txt", "pheno\n1.5\n2.5\n-1\n");
    CHECK(read_phenotype((dir / "y.txt").string()) == std::vector<double>{1.5, 2.5, -1.0});
    write_file(dir / "y2.txt", "1.5\n2.5\n");
    CHECK(read_phenotype((dir / "y2.txt").string()).size() == 2);
}

TEST_CASE("report writers") {
    const auto dir = testing::temp_dir("io_reports");
    LocFdrVector T;
    T.values = {0.5, 0.01, 0.0};
    RejectionSet r;
    r.rejected = {2, 3};
    const std::vector<double> z{0.1, 3.0, 9.0};
    const std::vector<std::string> ids{"a", "b", "c"};
    write_rejections_tsv((dir / "r.tsv").string(), ids, z, T, r);
    CHECK(read_file(dir / "r.tsv") == "id\tz\tT\trejected\na\t0.10000000000000001\t0.5\t0\nb\t3\t0.01\t1\nc\t9\t0\t1\n");

    write_manhattan_csv((dir / "m.csv").string(), T, 0.01);
    const auto m = read_file(dir / "m.csv");
    CHECK(m.rfind("i,neg2log10T,threshold_line\n1,", 0) == 0);
    CHECK(m.find("\n2,4,4\n") != std::string::npos);

    write_locfdr_tsv((dir / "t.tsv").string(), ids, z, T);
    CHECK(read_file(dir / "t.tsv").rfind("id\tz\tT\tneg2log10T\n", 0) == 0);

    CHECK(neg2log10(0.01) == Approx(4.0));
    CHECK(std::isfinite(neg2log10(0.0)));
    CHECK(default_ids(2) == std::vector<std::string>{"1", "2"});
}
