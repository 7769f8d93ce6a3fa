"""Parse an experiment spreadsheet and inspect the validated rows.

Every line of the CSV becomes either a typed row or a row error; a bad line
never stops the batch. Run from the repository root:

    python demos/01_experiment_file.py
"""
import tempfile
from pathlib import Path

from dermpipe import ExperimentRow, parse_experiment_file

CSV_TEXT = """\
method,dataset,split,epochs,segment,imgaug,batchsize,imgsize,resizefilter,colorspace,classweights
VGG16,ISIC-2019,pre,10,-1,hflip_rot24,12,450,nearest,RGB,[0.2,0.8]
SC19,ISIC-2016,n=100,15,0.1,hflip_rot4,64,227,bilinear,HSV,compute
baseline,synthetic,n=20,10,-1,hflip,16,32,nearest,RGB,compute
baseline,synthetic,n=20,0,-1,hflip,16,32,nearest,RGB,compute
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "experiments.csv"
    path.write_text(CSV_TEXT, encoding="utf-8")
    entries = parse_experiment_file(path)

print(f"parsed {len(entries)} data lines\n")
for number, entry in entries:
    if isinstance(entry, ExperimentRow):
        print(f"row {number}: method={entry.method!r} dataset={entry.dataset!r}")
        print(f"    split={entry.split} epochs={entry.epochs} augmentation={entry.imgaug!r}")
        print(f"    geometry={entry.img_size}px via {entry.resize_filter.value}, "
              f"space={entry.color_space.value}, weights={entry.class_weights}")
        print(f"    segmentation enabled: {entry.segmentation_enabled}")
    else:
        print(f"row {number}: REJECTED, column {entry.column!r}: {entry.reason}")
