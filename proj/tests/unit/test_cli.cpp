#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "pxthin/cli.hpp"

using namespace pxthin;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pxthin_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PXTHIN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST(Config, Defaults) {
  const auto c = parse("");
  EXPECT_EQ(c.family, ExponentFamily::Constant);
  EXPECT_EQ(c.tol, 1e-11);
  EXPECT_EQ(c.eps_schedule, default_eps_schedule());
  EXPECT_EQ(c.experiments, std::set<std::string>{"solve"});
}

TEST(Config, ParsesAllSections) {
  const auto c = parse(
      "[exponent]\nfamily = sinusoidal\ncoefficients = 2, 0.5, 1\nbeta = 1\n"
      "[mesh]\nlevel = 3\ngrading = 1\n"
      "[boundary]\npreset = offset_const\noffset = 1.5\n"
      "[solver]\ntol = 1e-10\neps_schedule = 1e-2, 1e-5, 1e-9\nseed = 4\nvi_trials = 10\n"
      "[experiments]\nrun = solve, freeze\ncenter = 0.1 0\nfreeze_radii = 0.3, 0.2, 0.1\n"
      "holder_centers = 0 0; 0.25 0\n"
      "[output]\ndir = somewhere\nname = x\nplots = true\n");
  EXPECT_EQ(c.family, ExponentFamily::Sinusoidal);
  EXPECT_EQ(c.coefficients, (std::vector<double>{2, 0.5, 1}));
  EXPECT_EQ(c.level, 3);
  EXPECT_EQ(c.preset, BoundaryPreset::OffsetConst);
  EXPECT_EQ(c.offset, 1.5);
  EXPECT_EQ(c.eps_schedule.size(), 3u);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.experiments, (std::set<std::string>{"solve", "freeze"}));
  EXPECT_EQ(c.center.x, 0.1);
  ASSERT_EQ(c.holder_centers.size(), 2u);
  EXPECT_EQ(c.holder_centers[1].x, 0.25);
  EXPECT_TRUE(c.plots);
}

TEST(Config, RejectsUnknownKeysSectionsAndValues) {
  EXPECT_THROW(parse("[mesh]\nlevle = 3\n"), InputError);
  EXPECT_THROW(parse("[meshes]\nlevel = 3\n"), InputError);
  EXPECT_THROW(parse("[mesh]\nlevel = three\n"), InputError);
  EXPECT_THROW(parse("[solver]\ntol = 1e-11x\n"), InputError);
  EXPECT_THROW(parse("[experiments]\nrun = solve, dance\n"), InputError);
  EXPECT_THROW(parse("[boundary]\npreset = custom\n"), InputError);
  EXPECT_THROW(parse("[exponent]\nfamily = cubic\n"), InputError);
  EXPECT_THROW(parse("[mesh\nlevel = 3\n"), InputError);
}

TEST(Config, DiagnosticNamesTheField) {
  try {
    parse("[mesh]\nlevel = three\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("[mesh] level"), std::string::npos);
  }
}

TEST(Run, LinearPresetSummary) {
  const auto dir = scratch("linear");
  write_file(dir / "c.ini", "[mesh]\nlevel = 4\n[boundary]\npreset = linear_xn\n[output]\ndir = out\n");
  const auto res = run_experiments(load_config(dir / "c.ini"));
  ASSERT_TRUE(fs::exists(dir / "out" / "summary.txt"));
  EXPECT_TRUE(res.summary.get("max_nodal_error").has_value());
  EXPECT_LE(std::stod(*res.summary.get("vi_violation")), 1e-8);
  for (const char* f : {"mesh.txt", "solution_u.txt", "solve_report.csv", "timing.csv"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Run, OffsetPresetIsExact) {
  const auto dir = scratch("offset");
  write_file(dir / "c.ini",
             "[exponent]\ncoefficients = 4\n[mesh]\nlevel = 4\n[boundary]\npreset = offset_const\noffset = 2\n"
             "[output]\ndir = out\n");
  const auto res = run_experiments(load_config(dir / "c.ini"));
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_LE(std::stod(*res.summary.get("max_nodal_error")), 1e-9);
  EXPECT_EQ(*res.summary.get("contract_exact_linear_solution"), "pass");
}

TEST(Run, CustomBoundaryFile) {
  const auto dir = scratch("custom");
  auto mesh = std::make_shared<const HalfDiskMesh>(build_half_disk_mesh(3));
  {
    std::ofstream out(dir / "g.txt");
    write_solution(out, FeFunction::interpolate(mesh, [](Point p) { return -p.y; }));
  }
  write_file(dir / "c.ini", "[mesh]\nlevel = 3\n[boundary]\npreset = custom\nfile = g.txt\n[output]\ndir = out\n");
  const auto res = run_experiments(load_config(dir / "c.ini"));
  EXPECT_EQ(res.exit_code, 0);
  write_file(dir / "d.ini", "[mesh]\nlevel = 4\n[boundary]\npreset = custom\nfile = g.txt\n[output]\ndir = out2\n");
  EXPECT_THROW(run_experiments(load_config(dir / "d.ini")), InputError);
}

TEST(Run, ByteIdenticalReruns) {
  const auto dir = scratch("determinism");
  const std::string cfg =
      "[exponent]\nfamily = sinusoidal\ncoefficients = 2, 0.5, 1\n[mesh]\nlevel = 4\n"
      "[boundary]\npreset = signorini32\n[experiments]\nrun = solve, reference, freeze\n"
      "freeze_radii = 0.3, 0.25, 0.2\n[output]\nplots = true\n";
  write_file(dir / "a.ini", cfg + "dir = a\nname = same\n");
  write_file(dir / "b.ini", cfg + "dir = b\nname = same\n");
  run_experiments(load_config(dir / "a.ini"));
  run_experiments(load_config(dir / "b.ini"));
  int compared = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    const auto name = e.path().filename();
    if (name == "timing.csv") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 7);
}

TEST(Run, CsvRealsUseSeventeenDigits) {
  EXPECT_EQ(fmt_real(0.1), "0.10000000000000001");
  EXPECT_EQ(fmt_real(2.0), "2");
}

TEST(Report, HeaderOnlyWhenEmpty) {
  const auto dir = scratch("report_empty");
  EXPECT_EQ(aggregate_report(dir), "run\n");
}

TEST(Report, SortedRowsAndIdempotent) {
  const auto dir = scratch("report");
  fs::create_directories(dir / "zeta");
  fs::create_directories(dir / "alpha");
  write_file(dir / "zeta" / "summary.txt", "run_name = zeta\nk1 = 1\n");
  write_file(dir / "alpha" / "summary.txt", "run_name = alpha\nk2 = x,y\n");
  const auto a = aggregate_report(dir);
  EXPECT_EQ(a, "run,k1,k2\nalpha,,\"x,y\"\nzeta,1,\n");
  EXPECT_EQ(aggregate_report(dir), a);
  EXPECT_THROW(aggregate_report(dir / "missing"), InputError);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("exit");
  write_file(dir / "bad.ini", "[mesh]\nlevle = 3\n");
  EXPECT_EQ(run_cli((dir / "bad.ini").string()), 2);  // missing subcommand
  EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "nope.ini").string()), 2);
  EXPECT_EQ(run_cli("report " + (dir / "nope").string()), 2);
  write_file(dir / "ok.ini", "[mesh]\nlevel = 2\n[boundary]\npreset = signorini32\n[output]\ndir = out\n");
  EXPECT_EQ(run_cli("run " + (dir / "ok.ini").string()), 0);
  EXPECT_EQ(run_cli("report " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
  EXPECT_EQ(run_cli("verify --trials 50 --seed 2"), 0);
}
