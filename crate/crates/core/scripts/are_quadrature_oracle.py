"""ARE roots for p = 2 from quadrature of the raw loss derivatives (no closed forms).

Usage: python3 are_quadrature_oracle.py KAPPA
"""
import mpmath as mp
mp.mp.dps = 30
def logK(k):  # p=2
    return mp.log(2*mp.pi*mp.besseli(0,k))
def loss(x, xi, kind, t):
    k = mp.sqrt(xi[0]**2+xi[1]**2); tx = xi[0]*x[0]+xi[1]*x[1]
    if kind=='kl': return -tx+logK(k)
    c=1+t
    if kind=='dpd': return -mp.e**(t*tx-t*logK(k))/t + mp.e**(logK(c*k)-c*logK(k))/c
    return -mp.e**(t*tx-(t/c)*logK(c*k))/t + 1/t
def grad(x, xi, kind, t, h=mp.mpf('1e-10')):
    g=[]
    for j in range(2):
        a=list(xi); b=list(xi); a[j]+=h; b[j]-=h
        g.append((loss(x,a,kind,t)-loss(x,b,kind,t))/(2*h))
    return g
def IJ(kappa, kind, t):
    xi0=[mp.mpf(kappa),mp.mpf(0)]
    f=lambda th: mp.e**(kappa*mp.cos(th)-logK(kappa))
    I=mp.matrix(2,2); J=mp.matrix(2,2)
    N=400; h=2*mp.pi/N
    ths=[j*h for j in range(N)]
    # I by trapezoid (spectrally accurate for periodic integrands)
    for th in ths:
        x=[mp.cos(th),mp.sin(th)]; g=grad(x,xi0,kind,t); w=f(th)*h
        for a in range(2):
            for b in range(2): I[a,b]+=w*g[a]*g[b]
    # J = d/dxi E_{xi0}[grad(X, xi)]
    e=mp.mpf('1e-6')
    for b in range(2):
        xp=list(xi0); xm=list(xi0); xp[b]+=e; xm[b]-=e
        gp=[0,0]; gm=[0,0]
        for th in ths:
            x=[mp.cos(th),mp.sin(th)]; w=f(th)*h
            G1=grad(x,xp,kind,t); G2=grad(x,xm,kind,t)
            for a in range(2): gp[a]+=w*G1[a]; gm[a]+=w*G2[a]
        for a in range(2): J[a,b]=(gp[a]-gm[a])/(2*e)
    return I,J
def are(kappa, kind, t):
    I,J=IJ(kappa,kind,t); Ik,_=IJ(kappa,'kl',0)
    return (mp.det(J)**2/(mp.det(I)*mp.det(Ik)))**(mp.mpf(1)/2)
import sys
kappa=float(sys.argv[1]) if len(sys.argv)>1 else 5
for kind in ['dpd','gamma']:
    r=mp.findroot(lambda t: are(kappa,kind,t)-mp.mpf('0.95'), (0.1,0.3), solver='secant', tol=1e-20)
    print(kind, mp.nstr(r,12), 'check', mp.nstr(are(kappa,kind,r),12))
