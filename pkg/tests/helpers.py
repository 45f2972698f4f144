"""Small fixture graphs shared by several test modules."""

from threshprof.config import ConvSpec
from threshprof.topology import FCSpec, GraphBuilder, OpKind, PoolSpec


def single_conv(cout=8, kernel=1, stride=1, padding=0, bias=False):
    b = GraphBuilder("conv")
    x = b.add(OpKind.INPUT)
    y = b.conv(x, ConvSpec(cout, kernel, stride, padding, bias))
    b.add(OpKind.OUTPUT, [y])
    return b.finish()


def chain(*kinds):
    """Input -> kinds... -> Output, each op taking the previous value."""
    b = GraphBuilder("chain")
    x = b.add(OpKind.INPUT)
    for k in kinds:
        x = b.add(k, [x])
    b.add(OpKind.OUTPUT, [x])
    return b.finish()


def op_zoo():
    """One of every op kind, with a concat fan-in."""
    b = GraphBuilder("zoo")
    x = b.add(OpKind.INPUT)
    a = b.conv_bn_relu(x, ConvSpec(6, 3, 1, 1, True))
    p = b.add(OpKind.MAXPOOL, [a], PoolSpec(3, 1, 1))
    q = b.add(OpKind.AVGPOOL, [a], PoolSpec(3, 1, 1))
    c = b.add(OpKind.CONCAT, [p, x, q])
    d = b.conv(c, ConvSpec(5, 7, 2, 3))
    e = b.add(OpKind.AVGPOOL, [d], PoolSpec(2, 2))
    g = b.add(OpKind.GLOBALAVGPOOL, [e])
    f = b.add(OpKind.FC, [g], FCSpec(4))
    b.add(OpKind.OUTPUT, [f])
    return b.finish()
