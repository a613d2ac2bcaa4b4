"""
Tests de la CLI hormander-lab invocando main() con argv.

Estrategia de testing:
- Mallas cortas y pocas trayectorias para que cada comando tarde segundos
- Códigos de salida: 0 compuertas superadas, 1 alguna fallida, 2 error
- Artefactos deterministas (mismos bytes al repetir, independientes de --workers)
"""

import csv
import json
from pathlib import Path

import pytest

from src.cli.main import COMMANDS, EXIT_ERROR, EXIT_FAILED, EXIT_PASSED, main

HYPO3 = {
    "label": "hypo3",
    "model": "hypo3",
    "grid": {"T": 1.0, "steps": 200},
    "bracket_depth": 2,
    "monte_carlo": {"paths": 3, "picard_paths": 4, "picard_iterations": 3, "gamma_paths": 3},
    "flow": {"refinement_levels": 2},
    "tolerances": {"expect_full_rank": True},
}

DEGENERATE2 = {
    "label": "degenerate2",
    "model": "degenerate2",
    "grid": {"T": 0.5, "steps": 50},
    "F": [[0.0, 1.0]],
    "bracket_depth": 1,
    "monte_carlo": {"paths": 3, "picard_paths": 4, "picard_iterations": 3, "gamma_paths": 5},
}


def _read_csv(path: Path) -> list[list[str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class TestHormanderCommand:
    """Tests del comando hormander."""

    def test_hypo3_full_rank(self, write_config, tmp_path, capsys):
        """Test 1: hypo3 da rango 3 y todas las compuertas pasan"""
        # Arrange
        path = write_config(HYPO3)

        # Act
        code = main(["hormander", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_PASSED
        assert report["status"] == "passed"
        assert report["results"]["rank"] == 3
        assert report["results"]["statement"] == "full rank at truncation n=3"
        span_rows = _read_csv(tmp_path / "runs" / "hormander" / "hypo3" / "span.csv")
        assert span_rows[0] == ["expression", "v_1", "v_2", "v_3"]
        assert [row[0] for row in span_rows[1:]] == ["s1", "c[s1]", "[s1,c[s1]]", "c[c[s1]]"]

    def test_expected_rank_mismatch_fails(self, write_config, capsys):
        """Test 2: esperar rango completo en degenerate2 da exit 1"""
        # Arrange
        payload = {**DEGENERATE2, "tolerances": {"expect_full_rank": True}}
        path = write_config(payload)

        # Act
        code = main(["hormander", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_FAILED
        assert "expected_rank" in report["failures"]
        assert report["results"]["rank"] == 1

    def test_expression_cap_is_error(self, write_config, capsys):
        """Test 3: heat_mult a profundidad 2 supera el tope de expresiones y da exit 2"""
        # Arrange
        path = write_config({"model": "heat_mult", "grid": {"T": 0.5, "steps": 20}})

        # Act
        code = main(["hormander", "--config", str(path), "--depth", "2", "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_ERROR
        assert report["error_type"] == "ExpressionCapError"
        assert report["details"]["cap"] == 500


class TestSimulateCommand:
    """Tests del comando simulate."""

    def test_row_count_and_frozen_coordinate(self, write_config, tmp_path):
        """Test 4: paths.csv tiene paths·(steps+1) filas y x_2 constante en degenerate2"""
        # Arrange
        path = write_config(DEGENERATE2)

        # Act
        code = main(["simulate", "--config", str(path)])

        # Assert
        assert code == EXIT_PASSED
        rows = _read_csv(tmp_path / "runs" / "simulate" / "degenerate2" / "paths.csv")
        assert rows[0] == ["t", "x_1", "x_2", "path_id"]
        assert len(rows) - 1 == 3 * 51
        assert {row[2] for row in rows[1:]} == {"1.0"}
        assert {row[3] for row in rows[1:]} == {"0", "1", "2"}

    def test_repeated_run_is_byte_identical(self, write_config, tmp_path):
        """Test 5: repetir con la misma configuración reproduce los mismos bytes"""
        # Arrange
        path = write_config(DEGENERATE2)
        directory = tmp_path / "runs" / "simulate" / "degenerate2"
        names = ["paths.csv", "picard.csv", "report.json", "manifest.json"]

        # Act
        main(["simulate", "--config", str(path)])
        first = {name: (directory / name).read_bytes() for name in names}
        main(["simulate", "--config", str(path)])
        second = {name: (directory / name).read_bytes() for name in names}

        # Assert
        assert first == second

    def test_workers_do_not_change_paths(self, write_config, tmp_path):
        """Test 6: --workers 1 y --workers 4 escriben el mismo paths.csv"""
        # Arrange
        path = write_config({**HYPO3, "label": "workers"})

        # Act
        main(["simulate", "--config", str(path), "--workers", "1", "--outdir", str(tmp_path / "one")])
        main(["simulate", "--config", str(path), "--workers", "4", "--outdir", str(tmp_path / "four")])

        # Assert
        sequential = (tmp_path / "one" / "simulate" / "workers" / "paths.csv").read_bytes()
        threaded = (tmp_path / "four" / "simulate" / "workers" / "paths.csv").read_bytes()
        assert sequential == threaded

    def test_manifest_records_effective_config(self, write_config, tmp_path):
        """Test 7: manifest.json guarda la configuración tras los flags"""
        # Arrange
        path = write_config(DEGENERATE2)

        # Act
        main(["simulate", "--config", str(path), "--seed", "99", "--dt", "0.02"])

        # Assert
        manifest = json.loads((tmp_path / "runs" / "simulate" / "degenerate2" / "manifest.json").read_text())
        assert manifest["seed"] == 99
        assert manifest["steps"] == 25
        assert manifest["config"]["grid"]["steps"] == 25

    def test_rerun_from_manifest_is_byte_identical(self, write_config, tmp_path):
        """Test 16: --config <dir>/manifest.json repite la ejecución con los mismos bytes"""
        # Arrange
        path = write_config(DEGENERATE2)
        directory = tmp_path / "runs" / "simulate" / "degenerate2"
        names = ["paths.csv", "picard.csv", "report.json", "manifest.json"]
        main(["simulate", "--config", str(path), "--seed", "99", "--dt", "0.02"])
        first = {name: (directory / name).read_bytes() for name in names}

        # Act
        code = main(["simulate", "--config", str(directory / "manifest.json")])

        # Assert
        assert code == EXIT_PASSED
        second = {name: (directory / name).read_bytes() for name in names}
        assert first == second


class TestFlowCheckCommand:
    """Tests del comando flow-check."""

    def test_conjugated_overflow_is_error(self, write_config, tmp_path, capsys):
        """Test 8: heat_mult con T = 2 y formulación conjugada da exit 2 nombrando la operación"""
        # Arrange
        path = write_config(
            {
                "label": "overflow",
                "model": "heat_mult",
                "grid": {"T": 2.0, "steps": 100},
                "flow": {"formulation": "conjugated"},
                "monte_carlo": {"paths": 1},
            }
        )

        # Act
        code = main(["flow-check", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_ERROR
        assert report["status"] == "error"
        assert report["error_type"] == "FormulationError"
        assert "apply_inverse_semigroup" in report["message"]
        assert report["details"]["operation"] == "apply_inverse_semigroup"
        written = json.loads((tmp_path / "runs" / "flow-check" / "overflow" / "report.json").read_text())
        assert written["error_type"] == "FormulationError"


class TestMalliavinCommand:
    """Tests del comando malliavin."""

    def test_reports_finite_difference_chain_rule(self, write_config, capsys):
        """Test 15: el reporte incluye la regla de la cadena por diferencias centradas bajo su tolerancia"""
        # Arrange
        path = write_config(HYPO3)

        # Act
        code = main(["malliavin", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code != EXIT_ERROR
        assert "chain_rule_fd" not in report["failures"]
        assert "chain_rule" not in report["failures"]
        assert 0.0 <= report["results"]["chain_rule_fd_gap"] <= 1e-6


class TestDensityCommand:
    """Tests del comando density."""

    def test_degenerate2_atom(self, write_config, tmp_path, capsys):
        """Test 9: degenerate2 con F = (0, 1) detecta el átomo y el veredicto es consistente"""
        # Arrange
        path = write_config(DEGENERATE2)

        # Act
        code = main(["density", "--config", str(path), "--paths", "100", "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code != EXIT_ERROR
        assert "verdict_consistent" not in report["failures"]
        assert report["results"]["atom_flag"] is True
        assert report["results"]["verdict"]["expect_density"] is False
        assert report["results"]["verdict"]["consistent"] is True
        samples = _read_csv(tmp_path / "runs" / "density" / "degenerate2" / "samples.csv")
        assert samples[0] == ["sample_id", "xi_1"]
        assert len(samples) == 101


class TestCliSurface:
    """Tests de errores de configuración, schema y comando all."""

    def test_config_error_reports_line(self, tmp_path, capsys):
        """Test 10: un JSON inválido da exit 2 con el número de línea"""
        # Arrange
        path = tmp_path / "broken.json"
        path.write_text('{\n  "model": "hypo3",\n  "seed": ,\n}\n', encoding="utf-8")

        # Act
        code = main(["hormander", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_ERROR
        assert report["error_type"] == "ConfigError"
        assert report["details"]["line"] == 3

    def test_unknown_model_is_error(self, write_config, capsys):
        """Test 11: un modelo fuera del zoo da exit 2"""
        # Arrange
        path = write_config({"model": "no_such_model"})

        # Act
        code = main(["hormander", "--config", str(path), "--json"])
        report = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_ERROR
        assert report["error_type"] == "UnknownModelError"

    def test_schema_command(self, capsys):
        """Test 12: schema imprime el JSON schema de ExperimentConfig"""
        # Act
        code = main(["schema"])
        schema = json.loads(capsys.readouterr().out)

        # Assert
        assert code == EXIT_PASSED
        assert "bracket_depth" in schema["properties"]
        assert "tolerances" in schema["properties"]

    def test_human_summary(self, write_config, capsys):
        """Test 13: sin --json se imprime un resumen legible"""
        # Arrange
        path = write_config(HYPO3)

        # Act
        main(["hormander", "--config", str(path)])
        output = capsys.readouterr().out

        # Assert
        assert "hormander: passed" in output
        assert "full rank at truncation n=3" in output

    @pytest.mark.slow
    def test_all_returns_worst_exit_code(self, write_config, tmp_path, capsys):
        """Test 14: all ejecuta los cinco comandos y devuelve el peor código"""
        # Arrange
        path = write_config({**HYPO3, "grid": {"T": 0.5, "steps": 50}})
        metrics_file = tmp_path / "metrics.prom"

        # Act
        code = main(["all", "--config", str(path), "--paths", "100", "--json", "--metrics-file", str(metrics_file)])
        reports = json.loads(capsys.readouterr().out)

        # Assert
        assert set(reports) == set(COMMANDS)
        codes = [
            EXIT_ERROR if report["status"] == "error" else EXIT_PASSED if report["status"] == "passed" else EXIT_FAILED
            for report in reports.values()
        ]
        assert code == max(codes)
        assert "command_runs_total" in metrics_file.read_text(encoding="utf-8")
