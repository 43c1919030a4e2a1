from nfisac import cli, em, selfcheck


def test_fresh_build_passes_every_check():
    results = selfcheck.run_selfcheck()
    assert len(results) == len(selfcheck.CHECKS)
    for res in results:
        assert res.passed, res.line()
        assert "tol=" in res.line()


def test_sign_flip_in_kernel_breaks_dipole_consistency(monkeypatch):
    original = em._dyadic_from_geometry
    monkeypatch.setattr(em, "_dyadic_from_geometry", lambda *a, **kw: -original(*a, **kw))
    res = selfcheck.check_dipole_green(n=50)
    assert not res.passed
    assert res.value > 1e-6


def test_cli_exit_code_on_failed_check(monkeypatch, capsys):
    def failing():
        return selfcheck.CheckResult("forced", False, 1.0, 0.0)

    monkeypatch.setattr(cli, "run_selfcheck", lambda: selfcheck.run_selfcheck((failing,)))
    assert cli.main(["selfcheck"]) == 3
    out = capsys.readouterr().out
    assert "[FAIL] forced" in out and "0/1 checks passed" in out


def test_crashing_check_is_reported_as_failure():
    def boom():
        raise RuntimeError("kaput")

    (res,) = selfcheck.run_selfcheck((boom,))
    assert not res.passed and "kaput" in res.detail
