from dampwave.scripts.plot_commands import commands_for, emit
from dampwave.services.grid import Grid, zeros
from dampwave.storage.artifacts import write_csv, write_grid_function


def test_ledger_recipe(tmp_path):
    path = write_csv(tmp_path / "ledger.csv", ["t", "E", "D_cumulative", "residual"], [(0.0, 1.0, 0.0, 0.0)], 0)
    cmds = commands_for(path)
    assert cmds[0] == "set title 'ledger'"
    assert any(c.startswith("plot ") and "using 1:2" in c and "using 1:3" in c for c in cmds)


def test_decay_recipe_uses_log_axes(tmp_path):
    path = write_csv(tmp_path / "decay.csv", ["t", "exact_norm", "bound", "ratio"], [(0.1, 1.0, 2.0, 0.5)], 0)
    assert "set logscale xy" in commands_for(path)


def test_unknown_table_is_skipped(tmp_path):
    path = write_csv(tmp_path / "misc.csv", ["a", "b", "c"], [(1, 2, 3)], 0)
    assert commands_for(path) == []


def test_emit_writes_one_png_per_recognized_csv(tmp_path):
    write_grid_function(tmp_path / "u.csv", zeros(Grid(4)), seed=0)
    write_csv(tmp_path / "sub" / "misc.csv", ["a"], [(1,)], 0)
    lines = emit(tmp_path)
    assert lines[0].startswith("set terminal")
    outputs = [line for line in lines if line.startswith("set output")]
    assert outputs == [f"set output '{tmp_path / 'u.png'}'"]
