from secnet.modules.autodiff.grad_check import MODEL_THRESHOLD, primitive_suite
from secnet.modules.trainer.trainer_utils import model_grad_check


class TestGradientSuite:
    def test_grad_check_command(self, secn):
        secn("grad-check")

    def test_every_primitive_passes(self):
        rows = primitive_suite(0)
        assert rows
        assert [row.op for row in rows if not row.ok] == []

    def test_end_to_end_network_passes(self):
        rows = model_grad_check(0)
        assert [row.op for row in rows] == ["model.flow", "model.lffn", "model.erff", "model.sfe"]
        for row in rows:
            assert row.threshold == MODEL_THRESHOLD
            assert row.max_rel_error < MODEL_THRESHOLD, row.op
