import json

import pytest

# filled by test_acceptance.py; printed in the terminal summary below
ACCEPTANCE_RESULTS: dict[str, list[tuple[str, bool]]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, checks in ACCEPTANCE_RESULTS.items():
        ok = bool(checks) and all(passed for _, passed in checks)
        terminalreporter.write_line(
            f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'}"
        )
        for name, passed in checks:
            terminalreporter.write_line(f"    {name}: {'PASS' if passed else 'FAIL'}")


@pytest.fixture
def write_json(tmp_path):
    def _write(name, payload):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write


def gt_payload(images, annotations):
    return {"images": images, "annotations": annotations}


def image(image_id, width=100, height=100, subset=None):
    payload = {"id": image_id, "width": width, "height": height}
    if subset is not None:
        payload["subset"] = subset
    return payload


def annotation(image_id, bbox, area=None):
    payload = {"image_id": image_id, "bbox": list(bbox)}
    if area is not None:
        payload["area"] = area
    return payload


def pred_payload(entries):
    return {"schema_version": "1", "entries": entries}


def pred(image_id, bbox, score, prompt_id="p1", label="object"):
    return {
        "image_id": image_id,
        "prompt_id": prompt_id,
        "label": label,
        "bbox": list(bbox),
        "score": score,
    }
