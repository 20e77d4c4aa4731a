from pathlib import Path

import pytest
from PIL import Image, ImageDraw

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def smoke_images(tmp_path):
    """Five deterministic images: flat background plus one drawn rectangle."""
    image_dir = tmp_path / "images"
    image_dir.mkdir()
    for i in range(5):
        image = Image.new("RGB", (160, 120), (20 * i, 40, 90))
        draw = ImageDraw.Draw(image)
        draw.rectangle([10 + 10 * i, 20, 60 + 10 * i, 70], fill=(200, 80 + 20 * i, 40))
        image.save(image_dir / f"scene{i}.png")
    return image_dir
