"""Independent oracle for the 2D top-degree Slobodetskij seminorm.

The autocorrelation of a piecewise-constant field is computed exactly by
polygon clipping of translated triangles; the radial/angular integral is
then done with Gauss rules. Usage: python3 scripts/slobodetskij_overlap_oracle.py M NR NT
"""
import sys
import time

import numpy as np
from whitney_dirac.mesh import Lattice
from whitney_dirac.whitney import assemble_complex
from whitney_dirac.quadrature import gauss_jacobi01
from whitney_dirac.fractional import slobodetskij
s=0.3
m=int(sys.argv[1]) if len(sys.argv)>1 else 4
NR=int(sys.argv[2]) if len(sys.argv)>2 else 24
NT=int(sys.argv[3]) if len(sys.argv)>3 else 8
cx=assemble_complex(Lattice.cube(2,m))
rng=np.random.default_rng(1)
u=rng.standard_normal(cx.dim(2))
tris=cx.mesh.coords(2)  # (T,3,2) unwrapped
c=cx.evaluate(2,u,tris.mean(axis=1))[:,0]
def clip(poly, a, b):
    # keep left side of directed line a->b
    out=[]
    nrm=np.array([-(b-a)[1],(b-a)[0]])
    def side(p): return (p-a)@nrm
    for i in range(len(poly)):
        P,Q=poly[i],poly[(i+1)%len(poly)]
        sp,sq=side(P),side(Q)
        if sp>=0: out.append(P)
        if sp*sq<0: out.append(P+(Q-P)*sp/(sp-sq))
    return out
def area(poly):
    if len(poly)<3: return 0.0
    p=np.array(poly); x,y=p[:,0],p[:,1]
    return 0.5*abs(x@np.roll(y,-1)-y@np.roll(x,-1))
def ccw(t):
    t=np.array(t)
    if (t[1]-t[0])[0]*(t[2]-t[0])[1]-(t[1]-t[0])[1]*(t[2]-t[0])[0]<0: t=t[::-1]
    return t
TR=[ccw(t) for t in tris]
lo=np.array([t.min(0) for t in TR]); hi=np.array([t.max(0) for t in TR])
images=[np.array([i,j],float) for i in (-1,0,1) for j in (-1,0,1)]
def corr(z):
    # <u, u(.+z)> = sum c_T c_T' |T cap (T' - z)|
    tot=0.0
    for q,Tq in enumerate(TR):
        for im in images:
            sh=-z+im
            l2,h2=lo[q]+sh,hi[q]+sh
            ov=np.where((lo<h2-1e-15).all(1)&(hi>l2+1e-15).all(1))[0]
            for p in ov:
                poly=[v for v in TR[p]]
                Q=Tq+sh
                for i in range(3):
                    poly=clip(poly,Q[i],Q[(i+1)%3])
                    if not poly: break
                tot+=c[p]*c[q]*area(poly)
    return tot
R0=float(np.sum(c*c*cx.mesh.volumes[2]))
def g(z): return 2*(R0-corr(z))
t0=time.time()
tot=0.0
th,wth=gauss_jacobi01(NT)
for sct in range(8):
    for t,wt in zip(th,wth):
        ang=sct*np.pi/4+t*np.pi/4; e=np.array([np.cos(ang),np.sin(ang)])
        R=0.5/max(abs(e[0]),abs(e[1]))
        edges=np.linspace(0,R,NR+1)
        for a,b in zip(edges[:-1],edges[1:]):
            if a==0:
                rr,ww=gauss_jacobi01(4,0.0,-2*s)
                for r,wr in zip(rr,ww): tot+=wt*np.pi/4*wr*b**(1-2*s)*g(r*b*e)/(r*b)
            else:
                rr,ww=gauss_jacobi01(4)
                for r,wr in zip(rr,ww):
                    zz=a+(b-a)*r; tot+=wt*np.pi/4*wr*(b-a)*zz**(-1-2*s)*g(zz*e)
v=slobodetskij(cx,2,u,s)
print(m,NR,NT,"oracle",np.sqrt(tot),"pkg",v.value,v.error_bar,time.time()-t0)
