"""Shapes and behaviour of the four networks.

Walks a 24 x 128 crop through the content encoder, style encoder,
style-driven decoder and the 2-D critic, and demonstrates that the
decoder's output actually depends on the injected style.
"""

import torch

from emovc.nets import ConversionModel, ModelConfig, adain, glu, pixel_shuffle_1d


def main():
    torch.manual_seed(0)
    model = ConversionModel(ModelConfig())
    x = torch.randn(1, 24, 128)

    with torch.no_grad():
        code = model.content_encode(0, x)
        style = model.style_encode(0, x)
        rebuilt = model.decode(0, code, style)
        prob = model.discriminate(0, x)
    print(f"input {tuple(x.shape)} -> content code {tuple(code.shape)},"
          f" style code {tuple(style.shape)}")
    print(f"decoder output {tuple(rebuilt.shape)}, critic score {float(prob):.3f}")

    with torch.no_grad():
        other_style = style + torch.randn_like(style)
        changed = model.decode(0, code, other_style)
    print(f"style injection changes the output by"
          f" {float((rebuilt - changed).abs().mean()):.4f} (mean abs)")

    # layer primitives
    pre = torch.tensor([[1.0, -1.0], [0.0, 0.0]])   # values, then gates
    print("glu([[1,-1],[0,0]]):", glu(pre, dim=0).tolist())
    print("pixel shuffle [[1,2],[3,4]] r=2:",
          pixel_shuffle_1d(torch.tensor([[1.0, 2.0], [3.0, 4.0]]), 2).tolist())
    channel = torch.tensor([[[1.0, 2.0, 3.0]]])
    print("adain([1,2,3], mean 5, scale 2):",
          adain(channel, torch.tensor([[5.0]]), torch.tensor([[2.0]])).squeeze().tolist())


if __name__ == "__main__":
    main()
